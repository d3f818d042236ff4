use std::f64::consts::SQRT_2;

use bergman_core::asymptotics::{dimension_consistency, que_mass, supnorm_scan, MassBox, MassRegion, ScanGrid};
use bergman_core::bounds::{
    auxlemma, gamma_ratio, gamma_ratio_integral, gamma_ratio_quadrature, heat_integral, heat_upper_hkeqn1,
    heat_upper_hkeqn4, t_terms, type1_bound, type2_bound, unit_sum, BoundReport, WeightVector, YMode,
    DEFAULT_LATTICE_RADIUS,
};
use bergman_core::forms::{GramOptions, OrthonormalBasis};
use bergman_core::hyperbolic::{PolyPoint, UhpPoint};
use bergman_core::orbits::{
    counting_function, enumerate_orbit, fundamental_domain_grid, injectivity_radius, jl_upper_bound, orbit_exp_sum,
    CountingData, GroupSpec, DEFAULT_RADIUS_CAP,
};
use bergman_core::quadfield::{fundamental_unit, QuadraticField, DEFAULT_LATTICE_CAP};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::FileConfig;
use crate::error::CliError;
use crate::output::Table;
use crate::parse;
use crate::{BergmanArgs, BoundsCommand, Command, GroupArgs, OrbitsCommand, QueArgs};

pub fn dispatch(cmd: &Command, cfg: &FileConfig) -> Result<Table, CliError> {
    match cmd {
        Command::Bergman(a) => bergman(a, cfg),
        Command::Bounds { which } => bounds(which, cfg),
        Command::Orbits { which, group } => orbits(which, group, cfg),
        Command::Que(a) => que(a, cfg),
    }
}

fn gram_options() -> GramOptions {
    GramOptions::default().parallel(true)
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::invalid(format!("missing --{flag}")))
}

fn bergman(a: &BergmanArgs, cfg: &FileConfig) -> Result<Table, CliError> {
    const S: &[&str] = &["bergman"];
    let k = cfg.pick(a.k, S, "k")?;
    let series = cfg.pick(a.series.clone(), S, "series")?;
    let (weights, single) = match (k, series) {
        (Some(_), Some(_)) => return Err(CliError::invalid("give either --k or --series, not both")),
        (Some(k), None) => (vec![k], true),
        (None, Some(s)) => (parse::series(&s)?, false),
        (None, None) => return Err(CliError::invalid("missing --k or --series")),
    };
    for &k in &weights {
        parse::even_weight(k)?;
    }
    let opts = gram_options();

    if let Some(m) = cfg.pick(a.export, S, "export")? {
        if !single {
            return Err(CliError::invalid("--export needs a single --k"));
        }
        let ex = OrthonormalBasis::new(weights[0], &opts)?.export(m);
        let mut t = Table::new(&format!("basis_k{}", weights[0]), &["form", "n", "coefficient"]);
        for (i, f) in ex.forms.iter().enumerate() {
            for (n, c) in f.iter().enumerate() {
                t.push(vec![json!(i), json!(n), json!(c)]);
            }
        }
        return Ok(t);
    }

    if a.sup || cfg.pick::<bool>(None, S, "sup")?.unwrap_or(false) {
        let grid = cfg.pick(a.grid.clone(), S, "grid")?;
        let mut rows = Vec::new();
        for &k in &weights {
            let g = match &grid {
                Some(s) => {
                    let v = parse::floats(s, 3, "--grid")?;
                    ScanGrid { nx: v[0] as usize, ny: v[1] as usize, y_max: v[2] }
                }
                None => ScanGrid::default_for(k),
            };
            let basis = OrthonormalBasis::new(k, &opts)?;
            if basis.dim() == 0 {
                rows.push(vec![json!(k), json!(0), json!(0.0), Value::Null, Value::Null, json!(0.0)]);
                continue;
            }
            let s = supnorm_scan(&basis, &g)?;
            rows.push(vec![
                json!(k),
                json!(basis.dim()),
                json!(s.sup),
                json!(s.argmax.x()),
                json!(s.argmax.y()),
                json!(s.normalized),
            ]);
        }
        let mut t = Table::new("supnorm", &["k", "dim", "sup", "argmax_x", "argmax_y", "sup_over_k32"]);
        t.rows = rows;
        return Ok(if single { t.single() } else { t });
    }

    let z = parse::point(&cfg.pick(a.point.clone(), S, "point")?.unwrap_or_else(|| "i".into()))?;
    let mut t = Table::new("bergman", &["k", "x", "y", "dim", "bergman", "ratio"]);
    for &k in &weights {
        let basis = OrthonormalBasis::new(k, &opts)?;
        let b = basis.bergman(&z)?;
        t.push(vec![json!(k), json!(z.x()), json!(z.y()), json!(basis.dim()), json!(b), json!(b / k as f64)]);
    }
    Ok(if single { t.single() } else { t })
}

fn weights(v: Option<Vec<u32>>, default: &[u32]) -> Result<WeightVector, CliError> {
    Ok(WeightVector::new(v.unwrap_or_else(|| default.to_vec()))?)
}

fn reports(name: &str, reports: &[BoundReport]) -> Result<Table, CliError> {
    Table::from_records(name, reports)
}

/// Uniform samples in the ranges used by the randomized bound checks.
fn sample_height(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.5..=4.0)
}

fn bounds(which: &BoundsCommand, cfg: &FileConfig) -> Result<Table, CliError> {
    match which {
        BoundsCommand::HeatIntegral { rho } => {
            let rhos = cfg.pick(rho.clone(), &["bounds", "heat-integral"], "rho")?.unwrap_or_else(|| vec![0.0]);
            let single = rhos.len() == 1;
            let mut out = Vec::new();
            for r in rhos {
                let v = heat_integral(r)?;
                out.push(BoundReport::new(v, 0.0, 2.0 * SQRT_2 * (-r).exp(), json!({ "rho": r })));
            }
            let t = reports("heat_integral", &out)?;
            Ok(if single { t.single() } else { t })
        }
        BoundsCommand::HeatChain { k, rho } => {
            const S: &[&str] = &["bounds", "heat-chain"];
            let ks = cfg.pick(k.clone(), S, "k")?.unwrap_or_else(|| (1..=20).map(|h| 2 * h).collect());
            let rhos = cfg.pick(rho.clone(), S, "rho")?.unwrap_or_else(|| (0..=60).map(|i| i as f64 / 10.0).collect());
            let mut t = Table::new("heat_chain", &["k", "rho", "hkeqn1", "hkeqn4", "satisfied"]);
            for &k in &ks {
                parse::even_weight(k)?;
                for &r in &rhos {
                    let a = heat_upper_hkeqn1(k, r)?;
                    let b = heat_upper_hkeqn4(k, r);
                    t.push(vec![json!(k), json!(r), json!(a), json!(b), json!(a <= b)]);
                }
            }
            Ok(t)
        }
        BoundsCommand::Type1 { k, rinj } => {
            const S: &[&str] = &["bounds", "type1"];
            let kv = weights(cfg.pick(k.clone(), S, "k")?, &[2])?;
            let r = required(cfg.pick(*rinj, S, "rinj")?, "rinj")?;
            let b = type1_bound(&kv, r)?;
            let mut t = Table::new("type1", &["k", "r_inj", "bound"]);
            t.push(vec![json!(kv.components()), json!(r), json!(b)]);
            Ok(t.single())
        }
        BoundsCommand::Type2 { k, rinj, y, sup_c } => {
            const S: &[&str] = &["bounds", "type2"];
            let kv = weights(cfg.pick(k.clone(), S, "k")?, &[2])?;
            let r = required(cfg.pick(*rinj, S, "rinj")?, "rinj")?;
            let mode = match (cfg.pick(y.clone(), S, "y")?, cfg.pick(*sup_c, S, "sup-c")?) {
                (Some(_), Some(_)) => return Err(CliError::invalid("give either --y or --sup-c")),
                (Some(ys), None) => YMode::Fixed(ys),
                (None, Some(c)) => YMode::Sup { c },
                (None, None) => return Err(CliError::invalid("missing --y or --sup-c")),
            };
            let b = type2_bound(&kv, r, &mode)?;
            let mut t = Table::new("type2", &["k", "r_inj", "orbit_part", "cusp_part", "total"]);
            t.push(vec![json!(kv.components()), json!(r), json!(b.orbit_part), json!(b.cusp_part), json!(b.total)]);
            Ok(t.single())
        }
        BoundsCommand::Auxlemma { d, k, trials, seed, lattice_radius } => {
            const S: &[&str] = &["bounds", "auxlemma"];
            let d = cfg.pick(*d, S, "D")?.unwrap_or(5);
            let fixed_k = cfg.pick(k.clone(), S, "k")?;
            let trials = cfg.pick(*trials, S, "trials")?.unwrap_or(20);
            let seed = cfg.pick(*seed, S, "seed")?.unwrap_or(0);
            let radius = cfg.pick(*lattice_radius, S, "lattice-radius")?.unwrap_or(DEFAULT_LATTICE_RADIUS);
            let field = QuadraticField::new(d)?;
            let eps0 = fundamental_unit(&field)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(trials);
            for _ in 0..trials {
                let kv = match &fixed_k {
                    Some(k) => WeightVector::new(k.clone())?,
                    None => WeightVector::new(vec![2 * rng.gen_range(1..=3), 2 * rng.gen_range(1..=3)])?,
                };
                let mut coords = Vec::with_capacity(2);
                for _ in 0..2 {
                    let x = rng.gen_range(-0.5..=0.5);
                    coords.push(UhpPoint::new(x, sample_height(&mut rng))?);
                }
                let n = rng.gen_range(-3i64..=3);
                let mut eps = eps0.pow(n)?;
                if rng.gen_bool(0.5) {
                    eps = eps.neg();
                }
                let z = PolyPoint::new(coords)?;
                out.push(auxlemma(&field, &z, &eps, &kv, radius, DEFAULT_LATTICE_CAP)?);
            }
            reports("auxlemma", &out)
        }
        BoundsCommand::UnitSum { d, y, trials, seed, n_max } => {
            const S: &[&str] = &["bounds", "unit-sum"];
            let d = cfg.pick(*d, S, "D")?.unwrap_or(5);
            let n_max = cfg.pick(*n_max, S, "n-max")?.unwrap_or(40);
            let field = QuadraticField::new(d)?;
            let ys: Vec<(f64, f64)> = match cfg.pick(y.clone(), S, "y")? {
                Some(v) if v.len() == 2 => vec![(v[0], v[1])],
                Some(v) => return Err(CliError::invalid(format!("--y needs two heights, got {}", v.len()))),
                None => {
                    let trials = cfg.pick(*trials, S, "trials")?.unwrap_or(20);
                    let seed = cfg.pick(*seed, S, "seed")?.unwrap_or(0);
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..trials).map(|_| (sample_height(&mut rng), sample_height(&mut rng))).collect()
                }
            };
            let mut out = Vec::new();
            for yy in ys {
                out.push(unit_sum(&field, yy, n_max)?.report);
            }
            reports("unit_sum", &out)
        }
        BoundsCommand::TTerms { rinj, delta } => {
            const S: &[&str] = &["bounds", "t-terms"];
            let rs = required(cfg.pick(rinj.clone(), S, "rinj")?, "rinj")?;
            let delta = cfg.pick(*delta, S, "delta")?;
            let mut t = Table::new(
                "t_terms",
                &["r_inj", "delta", "t1", "t2", "t3", "t3_intermediate", "t2_ceiling", "t3_ceiling", "within_ceilings"],
            );
            for &r in &rs {
                let dl = delta.unwrap_or(0.75 * r);
                let tt = t_terms(r, dl)?;
                t.push(vec![
                    json!(r),
                    json!(dl),
                    json!(tt.t1),
                    json!(tt.t2),
                    json!(tt.t3),
                    json!(tt.t3_intermediate),
                    json!(tt.t2_ceiling),
                    json!(tt.t3_ceiling),
                    json!(tt.within_ceilings()),
                ]);
            }
            Ok(if rs.len() == 1 { t.single() } else { t })
        }
        BoundsCommand::Gamma { k } => {
            let ks = cfg.pick(k.clone(), &["bounds", "gamma"], "k")?.unwrap_or_else(|| (1..=20).collect());
            let mut t = Table::new("gamma", &["k", "gamma_ratio", "integral_closed_form", "integral_quadrature", "abs_diff"]);
            for &k in &ks {
                if k == 0 {
                    return Err(CliError::invalid("gamma: k must be ≥ 1"));
                }
                let c = gamma_ratio_integral(k);
                let q = gamma_ratio_quadrature(k)?;
                t.push(vec![json!(k), json!(gamma_ratio(k)), json!(c), json!(q), json!((c - q).abs())]);
            }
            Ok(t)
        }
    }
}

struct GroupChoice {
    spec: GroupSpec,
    cap: f64,
}

fn group_choice(g: &GroupArgs, cfg: &FileConfig) -> Result<GroupChoice, CliError> {
    const S: &[&str] = &["orbits"];
    let name = cfg.pick(g.group.clone(), S, "group")?.unwrap_or_else(|| "gamma3".into());
    let keep = g.keep_parabolic || cfg.pick::<bool>(None, S, "keep-parabolic")?.unwrap_or(false);
    let cap = cfg.pick(g.cap, S, "cap")?.unwrap_or(DEFAULT_RADIUS_CAP);
    Ok(GroupChoice { spec: parse::group(&name, !keep)?, cap })
}

fn grid_points(grid: Option<String>, y_top: Option<f64>) -> Result<Vec<UhpPoint>, CliError> {
    let (nx, ny) = match grid {
        Some(s) => {
            let v = parse::floats(&s, 2, "--grid")?;
            (v[0] as usize, v[1] as usize)
        }
        None => (5, 5),
    };
    let y_top = y_top.unwrap_or(2.5);
    if nx == 0 || ny == 0 || !(y_top > 1.0) {
        return Err(CliError::invalid("grid needs nx, ny ≥ 1 and y_top > 1"));
    }
    Ok(fundamental_domain_grid(nx, ny, y_top))
}

fn orbits(which: &OrbitsCommand, g: &GroupArgs, cfg: &FileConfig) -> Result<Table, CliError> {
    let GroupChoice { spec, cap } = group_choice(g, cfg)?;
    match which {
        OrbitsCommand::Enum { point, radius } => {
            const S: &[&str] = &["orbits", "enum"];
            let z = parse::point(&cfg.pick(point.clone(), S, "point")?.unwrap_or_else(|| "i".into()))?;
            let radius = required(cfg.pick(*radius, S, "radius")?, "radius")?;
            let recs = enumerate_orbit(&spec, &z, radius, cap)?;
            let mut t = Table::new("orbit", &["a", "b", "c", "d", "rho"]);
            for r in &recs {
                let m = r.matrix;
                t.push(vec![json!(m.a), json!(m.b), json!(m.c), json!(m.d), json!(r.rho)]);
            }
            Ok(t)
        }
        OrbitsCommand::Count { point, radius, rho } => {
            const S: &[&str] = &["orbits", "count"];
            let z = parse::point(&cfg.pick(point.clone(), S, "point")?.unwrap_or_else(|| "i".into()))?;
            let radius = required(cfg.pick(*radius, S, "radius")?, "radius")?;
            let rhos = cfg
                .pick(rho.clone(), S, "rho")?
                .unwrap_or_else(|| (1..=20).map(|i| radius * i as f64 / 20.0).collect());
            if let Some(&bad) = rhos.iter().find(|&&r| !(r >= 0.0 && r <= radius)) {
                return Err(CliError::invalid(format!("rho {bad} outside [0, radius = {radius}]")));
            }
            let recs = enumerate_orbit(&spec, &z, radius, cap)?;
            let data = CountingData::from_records(spec, z, radius, &recs);
            let mut t = Table::new("counting", &["rho", "count"]);
            for &r in &rhos {
                t.push(vec![json!(r), json!(counting_function(&data, r))]);
            }
            Ok(t)
        }
        OrbitsCommand::Inj { grid, y_top, radius } => {
            const S: &[&str] = &["orbits", "inj"];
            let pts = grid_points(cfg.pick(grid.clone(), S, "grid")?, cfg.pick(*y_top, S, "y-top")?)?;
            let radius = cfg.pick(*radius, S, "radius")?.unwrap_or(4.0);
            let r = injectivity_radius(&spec, &pts, radius, cap)?;
            let mut t = Table::new("injectivity_radius", &["injectivity_radius", "samples", "search_radius"]);
            t.push(vec![json!(r), json!(pts.len()), json!(radius)]);
            Ok(t.single())
        }
        OrbitsCommand::Jl { grid, y_top, radius, safety, rinj } => {
            const S: &[&str] = &["orbits", "jl"];
            let pts = grid_points(cfg.pick(grid.clone(), S, "grid")?, cfg.pick(*y_top, S, "y-top")?)?;
            let radius = cfg.pick(*radius, S, "radius")?.unwrap_or(6.0);
            let safety = cfg.pick(*safety, S, "safety")?.unwrap_or(0.9);
            if !(safety > 0.0 && safety <= 1.0) {
                return Err(CliError::invalid(format!("--safety must lie in (0, 1] (got {safety})")));
            }
            let r = match cfg.pick(*rinj, S, "rinj")? {
                Some(r) => r,
                None => safety * injectivity_radius(&spec, &pts, radius.min(4.0), cap)?,
            };
            let s4 = (r / 4.0).sinh();
            let ceiling = 9.0 + 1.0 / (4.0 * s4 * s4);
            let f = |rho: f64| (-2.0 * rho).exp();
            let mut t = Table::new(
                "jl",
                &["x", "y", "r_inj", "count", "sum", "tail", "measured", "jl_bound", "ceiling", "satisfied"],
            );
            for z in &pts {
                let s = orbit_exp_sum(&spec, z, radius, r, cap)?;
                let recs = enumerate_orbit(&spec, z, radius, cap)?;
                let data = CountingData::from_records(spec, *z, radius, &recs);
                let jl = jl_upper_bound(&f, 0.75 * r, r, &data)?.total();
                // The identity contributes f(0) = 1.
                let measured = 1.0 + s.truncated + s.tail;
                t.push(vec![
                    json!(z.x()),
                    json!(z.y()),
                    json!(r),
                    json!(s.count),
                    json!(1.0 + s.truncated),
                    json!(s.tail),
                    json!(measured),
                    json!(jl),
                    json!(ceiling),
                    json!(measured <= jl && measured <= ceiling),
                ]);
            }
            Ok(t)
        }
    }
}

fn que(a: &QueArgs, cfg: &FileConfig) -> Result<Table, CliError> {
    const S: &[&str] = &["que"];
    let ks = cfg.pick(a.k.clone(), S, "k")?.unwrap_or_else(|| vec![12, 24, 36, 48, 60]);
    for &k in &ks {
        parse::even_weight(k)?;
    }
    let opts = gram_options();
    if a.dimension || cfg.pick::<bool>(None, S, "dimension")?.unwrap_or(false) {
        let mut rows = Vec::new();
        for &k in &ks {
            rows.push(dimension_consistency(&OrthonormalBasis::new(k, &opts)?, &opts)?);
        }
        return Table::from_records("dimension", &rows);
    }
    let full = a.full_domain || cfg.pick::<bool>(None, S, "full-domain")?.unwrap_or(false);
    let region = match (full, cfg.pick(a.region.clone(), S, "box")?) {
        (true, Some(_)) => return Err(CliError::invalid("give either --box or --full-domain")),
        (true, None) => MassRegion::FullDomain,
        (false, Some(s)) => {
            let v = parse::floats(&s, 4, "--box")?;
            let b = MassBox::new((v[0], v[1]), (v[2], v[3]))?;
            if !b.in_fundamental_domain {
                return Err(CliError::invalid(format!("box {s} leaves the standard fundamental domain")));
            }
            MassRegion::Box(b)
        }
        (false, None) => return Err(CliError::invalid("missing --box or --full-domain")),
    };
    let mut rows = Vec::new();
    for &k in &ks {
        let basis = OrthonormalBasis::new(k, &opts)?;
        if basis.dim() == 0 {
            eprintln!("skipping k = {k}: S_k = 0");
            continue;
        }
        rows.push(que_mass(&region, &basis, &opts)?);
    }
    Table::from_records("que", &rows)
}
