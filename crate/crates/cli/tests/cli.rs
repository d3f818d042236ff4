use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn bergman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bergman"))
        .args(args)
        .env_remove("BERGMAN_OUTPUT_DIR")
        .env_remove("BERGMAN_CONFIG")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn kernel_value_at_i() {
    let v = json(&bergman(&["bergman", "--k", "12", "--point", "i", "--format", "json"]));
    assert!((v["bergman"].as_f64().unwrap() - 3.0787).abs() < 1e-3);
    assert_eq!(v["dim"], 1);
}

#[test]
fn series_csv_has_header_and_ten_rows() {
    let out = bergman(&["bergman", "--series", "12:120:12", "--point", "i", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,x,y,dim,bergman,ratio");
    assert_eq!(lines.len(), 11);
    // 17 significant digits
    assert!(lines[1].contains("1.0000000000000000e0"));
}

#[test]
fn validation_errors_exit_two() {
    for args in [
        &["bergman", "--k", "13"][..],
        &["orbits", "enum", "--group", "gamma3", "--point", "i", "--radius", "40"],
        &["que", "--box", "-0.5,0.5,1.2"],
        &["que", "--box", "-0.5,0.5,0.5,2", "--k", "12"],
        &["bergman", "--k", "12", "--point", "0.3-1i"],
        &["bergman", "--bogus"],
    ] {
        let out = bergman(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
    let msg = String::from_utf8(bergman(&["bergman", "--k", "13"]).stderr).unwrap();
    assert!(msg.contains("even"));
}

#[test]
fn bounds_examples() {
    let v = json(&bergman(&["bounds", "heat-integral", "--rho", "0"]));
    let exact = std::f64::consts::SQRT_2 * std::f64::consts::PI.powi(2) / 6.0;
    assert!((v["truncated_value"].as_f64().unwrap() - exact).abs() < 1e-6);
    let v = json(&bergman(&["bounds", "type1", "--k", "2", "--rinj", "2"]));
    assert!((v["bound"].as_f64().unwrap() - 79.37).abs() < 0.01);
    let v = json(&bergman(&["bounds", "auxlemma", "--D", "5", "--k", "2,2", "--trials", "3"]));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for r in rows {
        for key in ["truncated_value", "tail_bound", "ceiling", "satisfied", "parameters"] {
            assert!(r.get(key).is_some(), "{key}");
        }
    }
}

#[test]
fn orbit_csv_is_sorted_and_symmetric() {
    let out = bergman(&["orbits", "enum", "--group", "gamma3", "--point", "i", "--radius", "6", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a,b,c,d,rho"));
    let rows: Vec<(i64, i64, i64, i64, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap(), f[4].parse().unwrap())
        })
        .collect();
    assert!(!rows.is_empty());
    assert!(rows.windows(2).all(|w| w[0].4 <= w[1].4));
    for &(a, b, c, d, rho) in &rows {
        // Inverse up to sign.
        let inv = rows.iter().any(|&(a2, b2, c2, d2, r2)| {
            ((a2, b2, c2, d2) == (d, -b, -c, a) || (a2, b2, c2, d2) == (-d, b, c, -a)) && (r2 - rho).abs() < 1e-9
        });
        assert!(inv, "({a},{b},{c},{d}) has no inverse");
    }
    let v = json(&bergman(&["orbits", "inj", "--group", "gamma3"]));
    assert!(v["injectivity_radius"].as_f64().unwrap() > 0.0);
}

#[test]
fn que_box_table() {
    let v = json(&bergman(&["que", "--box", "-0.5,0.5,1.2,2", "--k", "12,24,36,48,60"]));
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for r in rows {
        assert!((r["target"].as_f64().unwrap() - 1.0 / std::f64::consts::PI).abs() < 1e-12);
    }
    let v = json(&bergman(&["que", "--full-domain", "--k", "24"]));
    assert!((v[0]["mass"].as_f64().unwrap() - 1.0).abs() < 1e-3);
}

#[test]
fn config_file_and_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "format = \"csv\"\n[bounds.gamma]\nk = [1, 2, 3]\n").unwrap();
    let cfg_s = cfg.to_str().unwrap();

    let out = bergman(&["--config", cfg_s, "bounds", "gamma"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);

    // Flags override the file.
    let out = bergman(&["--config", cfg_s, "bounds", "gamma", "--k", "5", "--format", "json"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);

    let outdir = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_bergman"))
        .args(["bounds", "t-terms", "--rinj", "1", "--config", cfg_s])
        .env("BERGMAN_OUTPUT_DIR", &outdir)
        .status()
        .unwrap();
    assert!(status.success());
    let written = fs::read_to_string(outdir.join("t_terms.csv")).unwrap();
    assert!(written.starts_with("r_inj,delta,t1"));

    let explicit = dir.path().join("explicit.json");
    let out = bergman(&["bounds", "gamma", "--k", "1", "--output", explicit.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let v: Value = serde_json::from_str(&fs::read_to_string(explicit).unwrap()).unwrap();
    assert!((v[0]["integral_closed_form"].as_f64().unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
}
