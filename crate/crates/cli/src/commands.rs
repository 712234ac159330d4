use std::path::Path;

use perigid::certify::{
    certify_fixed_lattice, certify_spiderweb, certify_super_stable, generic_fixed_global_rigidity_test,
    generic_global_rigidity_test,
};
use perigid::construct::{conjugation_identity_check, finite_to_periodic, fixture, fixtures, octagon_finite, transport_stress};
use perigid::framework::{
    fixed_rigidity_matrix, is_fixed_lattice_inf_rigid, is_infinitesimally_rigid, rigidity_matrix,
    volume_rigidity_matrix,
};
use perigid::io::{self, FrameworkFile};
use perigid::linalg::{integer_rank, numeric_rank, to_rows, RankInfo};
use perigid::optimize::{certify_volume_constrained, standard_realization};
use perigid::stress::{
    canonical_scaling, covering_force_residual, fixed_stress_space, lambda_stress_space, stress_space,
    weighted_laplacians,
};
use perigid::svg::{render_covering, SvgStyle};
use perigid::{Certificate, Error, Marking, Result, Tolerances, Verdict};
use serde_json::{json, Map, Value};

use crate::{CertifyMode, Cli, Command, GenericMode, Outcome, StressMode, StressSource};

pub const DEFAULT_SEED: u64 = 0x5eed;

pub fn tolerances(cli: &Cli) -> Result<Tolerances> {
    let mut tol = Tolerances::default();
    if let Some(t) = cli.global.tol {
        tol = tol.with_tol(t);
    }
    let seed = match cli.global.seed {
        Some(s) => s,
        None => match std::env::var("PERIGID_SEED") {
            Ok(s) => s.trim().parse().map_err(|_| Error::Parse {
                path: "PERIGID_SEED".into(),
                message: format!("`{s}` is not an unsigned integer"),
            })?,
            Err(_) => DEFAULT_SEED,
        },
    };
    tol = tol.with_seed(seed);
    tol.validate()?;
    Ok(tol)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn load(path: Option<&Path>) -> Result<FrameworkFile> {
    io::parse(&read(path.ok_or(Error::Missing("input file"))?)?)
}

fn rank_json(info: &RankInfo, cols: usize) -> Value {
    json!({ "rank": info.rank, "nullity": info.nullity(cols), "marginal": info.marginal })
}

fn basis_json(basis: &nalgebra::DMatrix<f64>) -> Value {
    json!((0..basis.ncols()).map(|j| basis.column(j).iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn certificate_outcome(head: Map<String, Value>, cert: &Certificate) -> Outcome {
    let mut report = head;
    report.insert("verdict".into(), json!(cert.verdict));
    report.insert("certificate".into(), serde_json::to_value(cert).expect("serializable certificate"));
    let code = if cert.verdict.is_positive() { 0 } else { 1 };
    Outcome::new(Value::Object(report), code)
}

fn header(command: &str, tol: &Tolerances) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("tolerances".into(), serde_json::to_value(tol).expect("serializable tolerances"));
    m
}

pub fn dispatch(cli: &Cli, file: Option<&Path>) -> Result<Outcome> {
    let tol = tolerances(cli)?;
    match &cli.command {
        Command::Info { file: f } => info(file.or(f.as_deref()), &tol),
        Command::Rank { file: f } => rank(cli, file.or(f.as_deref()), &tol),
        Command::Stresses { file: f, mode } => stresses(file.or(f.as_deref()), *mode, &tol),
        Command::Certify { file: f, mode, stress } => certify(file.or(f.as_deref()), *mode, *stress, &tol),
        Command::GenericTest { file: f, mode, trials } => {
            let mut tol = tol;
            if let Some(k) = trials {
                tol.generic_trials = *k;
            }
            generic(file.or(f.as_deref()), *mode, &tol)
        }
        Command::Minimize { file: f, emit } => minimize(file.or(f.as_deref()), emit.as_deref(), &tol),
        Command::Cover { file: f, window, svg } => cover(file.or(f.as_deref()), *window, svg.as_deref(), &tol),
        Command::FromFinite { file: f, pairs, emit } => {
            from_finite(file.or(f.as_deref()), pairs, emit.as_deref(), &tol)
        }
        Command::Fixtures { name, emit } => fixtures_cmd(name.as_deref(), emit.as_deref(), &tol),
    }
}

fn info(path: Option<&Path>, tol: &Tolerances) -> Result<Outcome> {
    let file = load(path)?;
    let g = &file.graph;
    let mut m = header("info", tol);
    m.insert("dimension".into(), json!(g.dim()));
    m.insert("vertices".into(), json!(g.num_vertices()));
    m.insert("edges".into(), json!(g.num_edges()));
    m.insert("loops".into(), json!(g.edges().iter().filter(|e| e.is_loop()).count()));
    for mk in [Marking::Bar, Marking::Cable, Marking::Strut] {
        let count = g.edges().iter().filter(|e| e.marking == mk).count();
        m.insert(format!("{}s", mk.as_str()), json!(count));
    }
    m.insert("components".into(), json!(g.components().len()));
    m.insert("full_rank_condition".into(), serde_json::to_value(g.full_rank_condition(tol)?).expect("serializable"));
    if let Some(r) = &file.realization {
        m.insert("det".into(), json!(r.det()));
        m.insert("non_flat".into(), json!(r.is_non_flat(tol)));
        m.insert("affinely_spanning".into(), json!(r.is_affinely_spanning(tol)));
    }
    m.insert("has_stress".into(), json!(file.stress.is_some()));
    Ok(Outcome::new(Value::Object(m), 0))
}

fn rank(cli: &Cli, path: Option<&Path>, tol: &Tolerances) -> Result<Outcome> {
    let file = load(path)?;
    let g = &file.graph;
    let mut m = header("rank", tol);
    let mut mats = Map::new();
    let izd = g.incidence_zd();
    let int_rows: Vec<Vec<i64>> = to_rows(&izd).iter().map(|r| r.iter().map(|x| x.round() as i64).collect()).collect();
    m.insert("gain_rank".into(), json!(g.gain_rank()));
    m.insert("incidence_zd".into(), rank_json(&numeric_rank(&izd, tol)?, izd.ncols()));
    m.insert("incidence_zd_integer_rank".into(), json!(integer_rank(&int_rows)));
    if cli.global.emit_matrices {
        mats.insert("incidence_zd".into(), io::matrix_json(&izd));
    }
    if let Some(r) = &file.realization {
        let rm = rigidity_matrix(g, r)?;
        let rl = fixed_rigidity_matrix(g, r)?;
        m.insert("rigidity".into(), rank_json(&numeric_rank(&rm, tol)?, rm.ncols()));
        m.insert("fixed_rigidity".into(), rank_json(&numeric_rank(&rl, tol)?, rl.ncols()));
        m.insert("infinitesimally_rigid".into(), json!(is_infinitesimally_rigid(g, r, tol)?));
        m.insert("fixed_lattice_infinitesimally_rigid".into(), json!(is_fixed_lattice_inf_rigid(g, r, tol)?));
        if r.is_non_flat(tol) {
            let rv = volume_rigidity_matrix(g, r, tol)?;
            m.insert("volume_rigidity".into(), rank_json(&numeric_rank(&rv, tol)?, rv.ncols()));
            if cli.global.emit_matrices {
                mats.insert("volume_rigidity".into(), io::matrix_json(&rv));
            }
        }
        if cli.global.emit_matrices {
            mats.insert("rigidity".into(), io::matrix_json(&rm));
            mats.insert("fixed_rigidity".into(), io::matrix_json(&rl));
        }
    }
    if let Some(omega) = &file.stress {
        let lap = weighted_laplacians(g, omega)?;
        m.insert("laplacian".into(), rank_json(&numeric_rank(&lap.laplacian, tol)?, lap.laplacian.ncols()));
        m.insert(
            "laplacian_zd".into(),
            rank_json(&numeric_rank(&lap.laplacian_zd, tol)?, lap.laplacian_zd.ncols()),
        );
        if cli.global.emit_matrices {
            mats.insert("laplacian".into(), io::matrix_json(&lap.laplacian));
            mats.insert("laplacian_zd".into(), io::matrix_json(&lap.laplacian_zd));
        }
    }
    if cli.global.emit_matrices {
        m.insert("matrices".into(), Value::Object(mats));
    }
    Ok(Outcome::new(Value::Object(m), 0))
}

fn stresses(path: Option<&Path>, mode: StressMode, tol: &Tolerances) -> Result<Outcome> {
    let file = load(path)?;
    let g = &file.graph;
    let r = file.require_realization()?;
    let mut m = header("stresses", tol);
    match mode {
        StressMode::Flexible | StressMode::Fixed => {
            let basis = if mode == StressMode::Flexible {
                stress_space(g, r, tol)?
            } else {
                fixed_stress_space(g, r, tol)?
            };
            m.insert("mode".into(), json!(if mode == StressMode::Flexible { "flexible" } else { "fixed" }));
            m.insert("dimension".into(), json!(basis.ncols()));
            m.insert("basis".into(), basis_json(&basis));
        }
        StressMode::Volume => {
            let space = lambda_stress_space(g, r, tol)?;
            m.insert("mode".into(), json!("volume"));
            m.insert("dimension".into(), json!(space.kernel.ncols()));
            m.insert("basis".into(), basis_json(&space.omegas));
            m.insert("lambdas".into(), json!(space.lambdas));
        }
    }
    Ok(Outcome::new(Value::Object(m), 0))
}

/// The unique stress up to scale, or `None` with the space dimension.
fn unique(basis: &nalgebra::DMatrix<f64>) -> std::result::Result<Vec<f64>, usize> {
    if basis.ncols() == 1 {
        Ok(canonical_scaling(&basis.column(0).iter().copied().collect::<Vec<_>>()))
    } else {
        Err(basis.ncols())
    }
}

fn not_unique(mut m: Map<String, Value>, dim: usize) -> Outcome {
    m.insert("verdict".into(), json!(Verdict::Inconclusive));
    m.insert(
        "reason".into(),
        json!(format!("stress space has dimension {dim}; pass a stress in the input file")),
    );
    Outcome::new(Value::Object(m), 1)
}

fn certify(path: Option<&Path>, mode: CertifyMode, source: StressSource, tol: &Tolerances) -> Result<Outcome> {
    let file = load(path)?;
    let g = &file.graph;
    let mut r = file.require_realization()?.clone();
    let from_file = match source {
        StressSource::Auto => file.stress.is_some(),
        StressSource::FromFile => true,
        StressSource::Compute => false,
    };
    let mut m = header("certify", tol);
    m.insert(
        "mode".into(),
        json!(match mode {
            CertifyMode::Flexible => "flexible",
            CertifyMode::Fixed => "fixed",
            CertifyMode::Volume => "volume",
            CertifyMode::Spiderweb => "spiderweb",
        }),
    );
    m.insert("stress_source".into(), json!(if from_file { "file" } else { "computed" }));

    if mode == CertifyMode::Volume {
        let (omega, lambda) = if from_file {
            let lambda = file.lambda.ok_or(Error::Missing("lambda"))?;
            (file.require_stress()?.to_vec(), lambda)
        } else {
            let d = r.dim() as i32;
            r.require_non_flat(tol)?;
            let c = r.det().abs().powf(-1.0 / d as f64);
            if (c - 1.0).abs() > tol.residual_tol {
                r = r.scaled(c);
                m.insert("rescaled_to_unit_volume".into(), json!(true));
            }
            let space = lambda_stress_space(g, &r, tol)?;
            if space.kernel.ncols() != 1 {
                return Ok(not_unique(m, space.kernel.ncols()));
            }
            let omega: Vec<f64> = space.omegas.column(0).iter().copied().collect();
            let lambda = space.lambdas[0];
            // Fix the sign so that λ >= 0, then normalize ω.
            let sign = if lambda < 0.0 { -1.0 } else { 1.0 };
            let peak = omega.iter().fold(0.0_f64, |a, w| a.max(w.abs()));
            if peak == 0.0 {
                return Ok(not_unique(m, 0));
            }
            let s = sign / peak;
            (omega.iter().map(|w| w * s).collect(), lambda * s)
        };
        let cert = certify_volume_constrained(g, &r, &omega, lambda, tol)?;
        return Ok(certificate_outcome(m, &cert));
    }

    let omega = if from_file {
        file.require_stress()?.to_vec()
    } else {
        let basis = match mode {
            CertifyMode::Fixed => fixed_stress_space(g, &r, tol)?,
            _ => stress_space(g, &r, tol)?,
        };
        match unique(&basis) {
            Ok(w) => w,
            Err(dim) => return Ok(not_unique(m, dim)),
        }
    };
    let cert = match mode {
        CertifyMode::Flexible => certify_super_stable(g, &r, &omega, tol)?,
        CertifyMode::Fixed => certify_fixed_lattice(g, &r, &omega, tol)?,
        CertifyMode::Spiderweb => certify_spiderweb(g, &r, &omega, tol)?,
        CertifyMode::Volume => unreachable!("handled above"),
    };
    Ok(certificate_outcome(m, &cert))
}

fn generic(path: Option<&Path>, mode: GenericMode, tol: &Tolerances) -> Result<Outcome> {
    let file = load(path)?;
    let mut m = header("generic-test", tol);
    let cert = match mode {
        GenericMode::Flexible => {
            m.insert("mode".into(), json!("flexible"));
            generic_global_rigidity_test(&file.graph, tol)?
        }
        GenericMode::Fixed => {
            m.insert("mode".into(), json!("fixed"));
            generic_fixed_global_rigidity_test(&file.graph, None, tol)?
        }
    };
    Ok(certificate_outcome(m, &cert))
}

fn minimize(path: Option<&Path>, emit: Option<&Path>, tol: &Tolerances) -> Result<Outcome> {
    let file = load(path)?;
    let omega = file.require_stress()?;
    let (r, kkt) = standard_realization(&file.graph, omega, tol)?;
    let out = FrameworkFile {
        graph: file.graph.clone(),
        realization: Some(r),
        stress: Some(omega.to_vec()),
        lambda: Some(kkt.lambda),
    };
    let mut m = header("minimize", tol);
    m.insert("kkt".into(), serde_json::to_value(kkt).expect("serializable"));
    if let Some(p) = emit {
        write(p, &io::emit(&out))?;
        m.insert("written".into(), json!(p.display().to_string()));
    } else {
        m.insert("framework".into(), io::to_value(&out));
    }
    Ok(Outcome::new(Value::Object(m), if kkt.pass { 0 } else { 1 }))
}

fn cover(path: Option<&Path>, window: u32, svg: Option<&Path>, tol: &Tolerances) -> Result<Outcome> {
    let file = load(path)?;
    let g = &file.graph;
    let r = file.require_realization()?;
    let picture = render_covering(g, r, window, &SvgStyle::default(), tol)?;
    let Some(out) = svg else {
        let mut o = Outcome::new(Value::Null, 0);
        o.raw = Some(picture);
        return Ok(o);
    };
    write(out, &picture)?;
    let cw = g.covering_window(window);
    let mut m = header("cover", tol);
    m.insert("window".into(), json!(window));
    m.insert("cover_vertices".into(), json!(cw.vertices.len()));
    m.insert("cover_edges".into(), json!(cw.edges.len()));
    if let Some(omega) = &file.stress {
        let (residual, checked) = covering_force_residual(g, r, omega, window)?;
        m.insert("force_residual".into(), json!(residual));
        m.insert("interior_vertices_checked".into(), json!(checked));
    }
    m.insert("written".into(), json!(out.display().to_string()));
    Ok(Outcome::new(Value::Object(m), 0))
}

fn resolve(names: &[String], token: &str) -> Result<usize> {
    let token = token.trim();
    if let Some(i) = names.iter().position(|n| n == token) {
        return Ok(i);
    }
    match token.parse::<usize>() {
        Ok(i) if i < names.len() => Ok(i),
        _ => Err(Error::UnknownVertex(token.to_string())),
    }
}

pub fn parse_pairs(names: &[String], spec: &str) -> Result<Vec<(usize, usize)>> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (u, v) = item.split_once(':').ok_or_else(|| Error::Parse {
                path: "--pairs".into(),
                message: format!("`{item}` is not of the form u:v"),
            })?;
            Ok((resolve(names, u)?, resolve(names, v)?))
        })
        .collect()
}

fn from_finite(path: Option<&Path>, pairs: &str, emit: Option<&Path>, tol: &Tolerances) -> Result<Outcome> {
    let (f, omega) = io::parse_finite(&read(path.ok_or(Error::Missing("input file"))?)?)?;
    let pairs = parse_pairs(&f.vertices, pairs)?;
    let construction = finite_to_periodic(&f, &pairs, tol)?;
    let stress = omega.as_deref().map(|w| transport_stress(w, &construction)).transpose()?;
    let mut m = header("from-finite", tol);
    m.insert("vertices".into(), json!(construction.graph.num_vertices()));
    m.insert("edges".into(), json!(construction.graph.num_edges()));
    if let Some(w) = omega.as_deref() {
        m.insert("conjugation_residual".into(), json!(conjugation_identity_check(&f, w, &pairs, tol)?));
    }
    let out = FrameworkFile {
        graph: construction.graph,
        realization: Some(construction.realization),
        stress,
        lambda: None,
    };
    if let Some(p) = emit {
        write(p, &io::emit(&out))?;
        m.insert("written".into(), json!(p.display().to_string()));
    } else {
        m.insert("framework".into(), io::to_value(&out));
    }
    Ok(Outcome::new(Value::Object(m), 0))
}

fn fixtures_cmd(name: Option<&str>, emit: Option<&Path>, tol: &Tolerances) -> Result<Outcome> {
    let Some(name) = name else {
        let list: Vec<Value> = fixtures()
            .iter()
            .map(|f| json!({ "name": f.name, "summary": f.summary }))
            .chain(std::iter::once(json!({
                "name": "octagon-finite",
                "summary": "finite octagon framework before folding (use with from-finite --pairs 0:4,2:6)"
            })))
            .collect();
        let mut m = header("fixtures", tol);
        m.insert("fixtures".into(), json!(list));
        return Ok(Outcome::new(Value::Object(m), 0));
    };
    let text = if name == "octagon-finite" {
        let (f, omega) = octagon_finite();
        io::emit_finite(&f, Some(&omega))
    } else {
        let fx = fixture(name).ok_or_else(|| Error::Parse {
            path: "--name".into(),
            message: format!("no fixture named `{name}`"),
        })?;
        io::emit(&FrameworkFile::from(fx))
    };
    match emit {
        Some(p) => {
            write(p, &text)?;
            let mut m = header("fixtures", tol);
            m.insert("written".into(), json!(p.display().to_string()));
            Ok(Outcome::new(Value::Object(m), 0))
        }
        None => {
            let mut o = Outcome::new(Value::Null, 0);
            o.raw = Some(text);
            Ok(o)
        }
    }
}
