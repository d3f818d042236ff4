//! Parsers for points, weight ranges, groups and comma lists.

use bergman_core::hyperbolic::UhpPoint;
use bergman_core::orbits::GroupSpec;

use crate::error::CliError;

/// `i`, `2i`, `0.3+1.5i` or `x,y`.
pub fn point(s: &str) -> Result<UhpPoint, CliError> {
    let bad = || CliError::invalid(format!("cannot parse point '{s}' (use i, 2i, 0.3+1.5i or x,y)"));
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let (x, y) = if let Some((a, b)) = t.split_once(',') {
        (a.parse::<f64>().map_err(|_| bad())?, b.parse::<f64>().map_err(|_| bad())?)
    } else {
        let body = t.strip_suffix('i').ok_or_else(bad)?;
        // Split at the last sign that is not a leading sign or an exponent sign.
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&j| (bytes[j] == b'+' || bytes[j] == b'-') && !matches!(bytes[j - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(j) => (&body[..j], &body[j..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => 1.0,
            "-" => -1.0,
            v => v.parse::<f64>().map_err(|_| bad())?,
        };
        (re.parse::<f64>().map_err(|_| bad())?, im)
    };
    Ok(UhpPoint::new(x, y)?)
}

/// `start:end:step`, inclusive of `end` when it is hit.
pub fn series(s: &str) -> Result<Vec<u32>, CliError> {
    let bad = || CliError::invalid(format!("cannot parse series '{s}' (use start:end:step)"));
    let parts: Vec<u32> = s.split(':').map(|p| p.trim().parse::<u32>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let [a, b, step] = parts[..] else { return Err(bad()) };
    if step == 0 || a > b {
        return Err(bad());
    }
    Ok((a..=b).step_by(step as usize).collect())
}

/// `full` / `psl2z`, or `gammaN` / `gamma(N)`.
pub fn group(s: &str, exclude_parabolic: bool) -> Result<GroupSpec, CliError> {
    let t = s.trim().to_ascii_lowercase();
    if t == "full" || t == "psl2z" {
        return Ok(GroupSpec::full_psl2z(exclude_parabolic));
    }
    let level = t
        .strip_prefix("gamma")
        .map(|r| r.trim_start_matches('(').trim_end_matches(')'))
        .and_then(|r| r.parse::<u32>().ok())
        .ok_or_else(|| CliError::invalid(format!("unknown group '{s}' (use full or gammaN)")))?;
    Ok(GroupSpec::principal_congruence(level, exclude_parabolic)?)
}

pub fn floats(s: &str, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::invalid(format!("{what}: expected {n} comma-separated numbers, got '{s}'")))?;
    if v.len() != n {
        return Err(CliError::invalid(format!("{what}: expected {n} comma-separated numbers, got '{s}'")));
    }
    Ok(v)
}

pub fn even_weight(k: u32) -> Result<u32, CliError> {
    if k == 0 || k % 2 == 1 {
        return Err(CliError::invalid(format!("weight k must be even and positive for level one (got {k})")));
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points() {
        let p = |s| {
            let z = point(s).unwrap();
            (z.x(), z.y())
        };
        assert_eq!(p("i"), (0.0, 1.0));
        assert_eq!(p("2i"), (0.0, 2.0));
        assert_eq!(p("0.3+1.5i"), (0.3, 1.5));
        assert_eq!(p("-0.3+1.5i"), (-0.3, 1.5));
        assert_eq!(p("1e-1+2i"), (0.1, 2.0));
        assert_eq!(p("0.25,0.9"), (0.25, 0.9));
        assert!(point("0.3-1.5i").is_err());
        assert!(point("abc").is_err());
    }

    #[test]
    fn series_and_groups() {
        assert_eq!(series("12:120:12").unwrap().len(), 10);
        assert_eq!(series("2:7:2").unwrap(), vec![2, 4, 6]);
        assert!(series("12:120").is_err());
        assert!(series("12:10:2").is_err());
        assert!(group("gamma3", true).is_ok());
        assert!(group("Gamma(4)", true).is_ok());
        assert!(group("full", false).is_ok());
        assert_eq!(group("gamma2", true).unwrap_err().exit_code(), 2);
        assert!(even_weight(13).unwrap_err().to_string().contains("even"));
    }
}
