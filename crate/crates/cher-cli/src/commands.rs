//! One handler per subcommand. Each builds its effective parameter list,
//! hashes it, stamps the hash into every artifact, and returns the summary
//! object printed on standard output. A fixed configuration (and seed)
//! therefore yields byte-identical artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use cher::dephasing::{factors_from_map, reconstruct_from_chi, DephasingFactors};
use cher::io;
use cher::lie::{root_system, GeneratorSet, RootSystem};
use cher::nonclassicality::{
    nonclassicality_lp_with_cap, nonclassicality_negativity, nonclassicality_of_dynamics,
    NonclassicalityResult,
};
use cher::oracle::{discretize_bath, reduced_coherences, ModeConfig, OracleMethod};
use cher::retrieval::{
    detect_delta, invert_1d, invert_pair_correlated, InversionConfig, InversionReport,
    PairInversionConfig, QuasiDistribution,
};
use cher::spin_boson::{
    compute_theta_phi, qubit_pair_factors, relative_phase_factor, single_qubit_factor, BathParams,
    SpectralDensity,
};
use cher::st0::{
    fid_inversion_config, fid_time_grid, identify_axis, noise_study, recover_distribution,
    simulate_return_probs, NoiseConfig, ST0Params, HBAR_UEV_NS,
};
use cher::{Error, Result};

use crate::cli::{
    Cli, Command, FactorsArgs, Method, Model, OracleArgs, PairOhmicArgs, PhaseSweepArgs,
    PipelineCommand, RetrieveArgs, St0Command, St0SimulateArgs,
};

pub fn run(cli: Cli) -> Result<Value> {
    let out = OutDir::resolve(cli.out_dir)?;
    match cli.command {
        Command::Roots(a) => roots(&out, a.n),
        Command::Factors(a) => factors(&out, &a),
        Command::Retrieve(a) => retrieve(&out, &a),
        Command::Measure(a) => measure(&out, &a.input, a.method, a.lp_cap),
        Command::Chi(a) => chi(&out, &a.input),
        Command::St0(a) => match a.command {
            St0Command::Simulate(s) => st0_simulate(&out, &s),
        },
        Command::Oracle(a) => oracle(&out, &a),
        Command::Pipeline(a) => match a.command {
            PipelineCommand::PairOhmic(p) => pair_ohmic(&out, &p),
            PipelineCommand::PhaseSweep(p) => phase_sweep(&out, &p),
        },
    }
}

struct OutDir(PathBuf);

impl OutDir {
    fn resolve(flag: Option<PathBuf>) -> Result<Self> {
        let dir = flag
            .or_else(|| std::env::var_os("CHER_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(OutDir(dir))
    }

    fn write(&self, name: &str, contents: &str) -> Result<String> {
        let path = self.0.join(name);
        io::write_atomic(&path, contents)?;
        Ok(path.display().to_string())
    }
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::InvalidState(format!("cannot read {}: {e}", path.display()))
    })
}

fn uniform_grid(t_end: f64, samples: usize) -> Result<Vec<f64>> {
    if samples < 4 {
        return Err(Error::BadTimeGrid(format!(
            "need at least four samples, got {samples}"
        )));
    }
    if !(t_end > 0.0) {
        return Err(Error::BadTimeGrid(format!(
            "grid end must be positive, got {t_end}"
        )));
    }
    let dt = t_end / (samples - 1) as f64;
    Ok((0..samples).map(|k| k as f64 * dt).collect())
}

fn report_value(label: &str, rep: &InversionReport) -> Value {
    json!({
        "label": label,
        "samples": rep.samples,
        "transform_len": rep.transform_len,
        "dt": rep.dt,
        "domega": rep.domega,
        "window": rep.window,
        "tail_magnitude": rep.tail_magnitude,
        "max_imag_residue": rep.max_imag_residue,
        "mass_defect": rep.mass_defect,
        "forward_residuals": rep.forward_residuals,
    })
}

fn roots(out: &OutDir, n: usize) -> Result<Value> {
    let rs = root_system(n)?;
    let hash = io::config_hash(&[("command", "roots".into()), ("n", n.to_string())]);
    let mut csv = String::new();
    let _ = writeln!(csv, "# format {}", io::FORMAT_TAG);
    let _ = writeln!(csv, "# n {n}");
    let _ = writeln!(csv, "# jacobian {}", rs.jacobian());
    let _ = writeln!(csv, "# config {hash}");
    csv.push_str("index,positive,simple");
    for c in 1..n {
        let _ = write!(csv, ",c{c}");
    }
    csv.push('\n');
    for root in rs.roots() {
        let simple = rs.simple_indices().contains(&root.index);
        let _ = write!(
            csv,
            "{},{},{}",
            root.index,
            rs.is_positive(root.index),
            simple
        );
        for a in &root.alpha {
            let _ = write!(csv, ",{a}");
        }
        csv.push('\n');
    }
    let path = out.write(&format!("roots_n{n}.csv"), &csv)?;
    Ok(json!({
        "command": "roots",
        "config": hash,
        "n": n,
        "roots": rs.roots().len(),
        "jacobian": rs.jacobian(),
        "artifacts": { "roots": path },
    }))
}

fn factors(out: &OutDir, args: &FactorsArgs) -> Result<Value> {
    let table_text = match &args.spectral_table {
        Some(p) => Some(read_input(p)?),
        None => None,
    };
    let sd = match &table_text {
        Some(text) => SpectralDensity::tabulated(io::spectral_table_from_csv(text)?)?,
        None => SpectralDensity::ohmic(args.wc)?,
    };
    let bath = BathParams {
        temperature: args.temperature,
        coupling_prefactor: args.coupling,
    };
    bath.validate()?;
    let model_name = match args.model {
        Model::Single => "single",
        Model::Pair => "pair",
    };
    // The pair default ends at 63/64 of the transform half-period so the
    // samples land on the lattice of the default 512-point pair inversion.
    let (t_end, samples) = match args.model {
        Model::Single => (
            args.t_end.unwrap_or(40.0 / args.wc),
            args.samples.unwrap_or(2048),
        ),
        Model::Pair => (
            args.t_end.unwrap_or(39.375 / args.wc),
            args.samples.unwrap_or(64),
        ),
    };
    let times = uniform_grid(t_end, samples)?;
    let f = match args.model {
        Model::Single => single_qubit_factor(&compute_theta_phi(&sd, &bath, &times)?)?,
        Model::Pair => qubit_pair_factors(&sd, &bath, &times)?,
    };
    let mut fields: Vec<(&str, String)> = vec![
        ("command", "factors".into()),
        ("model", model_name.into()),
        ("temperature", args.temperature.to_string()),
        ("coupling", args.coupling.to_string()),
        ("t_end", t_end.to_string()),
        ("samples", samples.to_string()),
    ];
    match &table_text {
        Some(text) => fields.push(("spectral_table", text.clone())),
        None => fields.push(("wc", args.wc.to_string())),
    }
    let hash = io::config_hash(&fields);
    let path = out.write(
        &format!("factors_{model_name}.csv"),
        &io::factors_to_csv(&f, Some(&hash)),
    )?;
    Ok(json!({
        "command": "factors",
        "config": hash,
        "model": model_name,
        "n": f.dim(),
        "samples": samples,
        "t_end": t_end,
        "artifacts": { "factors": path },
    }))
}

/// Composite factors must be pointwise products of their simple
/// constituents before the directions can be inverted one at a time.
fn check_independent(f: &DephasingFactors, rs: &RootSystem, tol: f64) -> Result<()> {
    for &idx in rs.positive_indices() {
        if rs.simple_indices().contains(&idx) {
            continue;
        }
        let coeffs = rs.expand_in_simple(rs.root(idx).expect("positive root present"))?;
        let series = f.factor(idx).ok_or(Error::MissingRootFactor(idx))?;
        let mut gap = 0.0_f64;
        for (s, &value) in series.iter().enumerate() {
            let mut prod = num_complex::Complex64::new(1.0, 0.0);
            for (&c, &sidx) in coeffs.iter().zip(rs.simple_indices()) {
                let k = c.round();
                if (c - k).abs() > 1e-9 || k < 0.0 {
                    return Err(Error::NoInversionStrategy(format!(
                        "root {idx} is not a nonnegative combination of simple roots"
                    )));
                }
                let base = f.factor(sidx).ok_or(Error::MissingRootFactor(sidx))?[s];
                prod *= base.powu(k as u32);
            }
            gap = gap.max((value - prod).norm());
        }
        if gap > tol {
            return Err(Error::NoInversionStrategy(format!(
                "factor {idx} deviates from the product of its simple parts by {gap:.3e}; \
                 only dimension-4 correlated sets have a two-axis strategy"
            )));
        }
    }
    Ok(())
}

fn retrieve(out: &OutDir, args: &RetrieveArgs) -> Result<Value> {
    let text = read_input(&args.input)?;
    let f = io::factors_from_csv(&text)?;
    let mut fields: Vec<(&str, String)> = vec![
        ("command", "retrieve".into()),
        ("input", text.clone()),
        ("grid", args.grid.to_string()),
        ("pad", args.pad.to_string()),
        ("tail_threshold", args.tail_threshold.to_string()),
    ];
    if let Some(w) = args.window {
        fields.push(("window", w.to_string()));
    }
    if let Some(wc) = args.wc {
        fields.push(("wc", wc.to_string()));
    }
    let hash = io::config_hash(&fields);

    let cfg = InversionConfig {
        pad: args.pad,
        tail_threshold: args.tail_threshold,
        window: args.window,
        forward_check: true,
    };
    let rs = root_system(f.dim())?;

    let mut artifacts = serde_json::Map::new();
    let mut inversions = Vec::new();
    let mut deltas = Vec::new();

    let independent = check_independent(&f, &rs, 1e-8);
    if f.dim() == 4 && independent.is_err() {
        let wc = args.wc.ok_or_else(|| {
            Error::InvalidState(
                "correlated qubit-pair input needs --wc, the bath cutoff of the profile".into(),
            )
        })?;
        let mut pair_cfg = PairInversionConfig::for_cutoff(wc);
        pair_cfg.grid = args.grid;
        pair_cfg.tail_threshold = args.tail_threshold;
        let (q, rep) = invert_pair_correlated(&f, wc, &pair_cfg)?;
        let path = out.write("quasi_pair.csv", &io::quasi_to_csv(&q, Some(&hash))?)?;
        artifacts.insert("quasi_pair".into(), path.into());
        inversions.push(report_value("pair", &rep));
    } else {
        independent?;
        for &idx in rs.simple_indices() {
            let series = f.factor(idx).ok_or(Error::MissingRootFactor(idx))?;
            let label = format!("dir{idx}");
            if let Some(loc) = detect_delta(f.times(), series) {
                deltas.push(json!({ "label": label, "location": loc }));
                continue;
            }
            let (q, rep) = invert_1d(f.times(), series, &label, &cfg)?;
            let path = out.write(
                &format!("quasi_{label}.csv"),
                &io::quasi_to_csv(&q, Some(&hash))?,
            )?;
            artifacts.insert(format!("quasi_{label}"), path.into());
            inversions.push(report_value(&label, &rep));
        }
    }

    let report = json!({
        "format": io::FORMAT_TAG,
        "config_hash": hash,
        "inversions": inversions,
        "deltas": deltas,
    });
    let report_path = out.write(
        "retrieve_report.json",
        &format!("{}\n", serde_json::to_string_pretty(&report).expect("plain data")),
    )?;
    artifacts.insert("report".into(), report_path.into());

    Ok(json!({
        "command": "retrieve",
        "config": hash,
        "n": f.dim(),
        "inversions": inversions,
        "deltas": deltas,
        "artifacts": Value::Object(artifacts),
    }))
}

fn load_quasi(path: &Path, text: &str) -> Result<QuasiDistribution> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => io::quasi_from_json(text),
        Some("csv") => io::quasi_from_csv(text),
        other => Err(Error::InvalidState(format!(
            "unsupported input extension {other:?}; expected .csv or .json"
        ))),
    }
}

fn measure(out: &OutDir, input: &Path, method: Method, lp_cap: usize) -> Result<Value> {
    let text = read_input(input)?;
    let q = load_quasi(input, &text)?;
    let method_name = match method {
        Method::Negativity => "negativity",
        Method::LpOracle => "lp-oracle",
    };
    let hash = io::config_hash(&[
        ("command", "measure".into()),
        ("input", text.clone()),
        ("method", method_name.into()),
        ("lp_cap", lp_cap.to_string()),
    ]);
    let result: NonclassicalityResult = match method {
        Method::Negativity => nonclassicality_negativity(&q),
        Method::LpOracle => nonclassicality_lp_with_cap(&q, lp_cap)?.0,
    };
    let record = io::MeasureRecord::from_result(&result, Some(hash.clone()));
    let path = out.write("measure.json", &io::measure_to_json(&record)?)?;
    Ok(json!({
        "command": "measure",
        "config": hash,
        "value": result.value,
        "method": method_name,
        "artifacts": { "measure": path },
    }))
}

fn chi(out: &OutDir, input: &Path) -> Result<Value> {
    let text = read_input(input)?;
    let series = io::chi_from_json(&text)?;
    let hash = io::config_hash(&[("command", "chi".into()), ("input", text.clone())]);
    let gens = GeneratorSet::new(series.dim())?;
    let map = reconstruct_from_chi(&series, &gens)?;
    let f = factors_from_map(&map)?;
    let cp_floor = series
        .min_eigenvalue_per_time()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let path = out.write("chi_factors.csv", &io::factors_to_csv(&f, Some(&hash)))?;
    Ok(json!({
        "command": "chi",
        "config": hash,
        "n": series.dim(),
        "times": series.times().len(),
        // most negative process-matrix eigenvalue across the series;
        // anything below roundoff means the input was not CP
        "cp_floor": cp_floor,
        "artifacts": { "factors": path },
    }))
}

fn st0_simulate(out: &OutDir, args: &St0SimulateArgs) -> Result<Value> {
    let params = ST0Params {
        exchange: args.j,
        gradient: args.db * 1e-3,
        g_factor: args.g,
        mu_b: args.mu_b,
        t2star: args.t2star,
        hbar: HBAR_UEV_NS,
    };
    params.validate()?;
    let hash = io::config_hash(&[
        ("command", "st0-simulate".into()),
        ("j", args.j.to_string()),
        ("db", args.db.to_string()),
        ("t2star", args.t2star.to_string()),
        ("g", args.g.to_string()),
        ("mu_b", args.mu_b.to_string()),
        ("periods", args.periods.to_string()),
        ("samples", args.samples.to_string()),
        ("noise_sigma", args.noise_sigma.to_string()),
        ("repeats", args.repeats.to_string()),
        ("seed", args.seed.to_string()),
    ]);

    let times = fid_time_grid(&params, args.periods, args.samples)?;
    let sim = simulate_return_probs(&params, &times)?;
    let traj = sim.trajectory()?;
    let fit = identify_axis(&traj)?;
    let (q, rep) = recover_distribution(&traj, &fit, &fid_inversion_config())?;
    let noiseless = nonclassicality_negativity(&q).value;
    let study = noise_study(
        &params,
        &times,
        &NoiseConfig {
            sigma: args.noise_sigma,
            repeats: args.repeats,
            seed: args.seed,
        },
    )?;

    let mut probs_csv = String::new();
    let _ = writeln!(probs_csv, "# format {}", io::FORMAT_TAG);
    let _ = writeln!(probs_csv, "# config {hash}");
    probs_csv.push_str("time,p_x,p_y,p_z\n");
    for (s, &t) in sim.times().iter().enumerate() {
        let _ = writeln!(
            probs_csv,
            "{t},{},{},{}",
            sim.series(0)[s],
            sim.series(1)[s],
            sim.series(2)[s]
        );
    }

    let mut traj_csv = String::new();
    let _ = writeln!(traj_csv, "# format {}", io::FORMAT_TAG);
    let _ = writeln!(traj_csv, "# config {hash}");
    traj_csv.push_str("time,r_x,r_y,r_z\n");
    for (&t, p) in traj.times().iter().zip(traj.points()) {
        let _ = writeln!(traj_csv, "{t},{},{},{}", p[0], p[1], p[2]);
    }

    let record = io::St0Record {
        format: io::FORMAT_TAG.into(),
        omega: fit.omega,
        tilt: fit.tilt,
        measure_mean: study.mean,
        measure_std: study.std,
        failures: study.failures,
        config_hash: Some(hash.clone()),
    };

    let mut artifacts = BTreeMap::new();
    artifacts.insert("probabilities", out.write("st0_probabilities.csv", &probs_csv)?);
    artifacts.insert("trajectory", out.write("st0_trajectory.csv", &traj_csv)?);
    artifacts.insert(
        "distribution",
        out.write("st0_distribution.csv", &io::quasi_to_csv(&q, Some(&hash))?)?,
    );
    artifacts.insert("result", out.write("st0_result.json", &io::st0_to_json(&record)?)?);

    Ok(json!({
        "command": "st0-simulate",
        "config": hash,
        "omega": fit.omega,
        "Omega": fit.tilt,
        "planarity": fit.planarity,
        "N_noiseless": noiseless,
        "N_mean": study.mean,
        "N_std": study.std,
        "failures": study.failures,
        "inversion": report_value("omega", &rep),
        "artifacts": artifacts,
    }))
}

fn oracle(out: &OutDir, args: &OracleArgs) -> Result<Value> {
    let text = read_input(&args.modes)?;
    let mut cfg: ModeConfig = io::modes_from_json(&text)?;
    if let Some(name) = &args.method {
        cfg.method = io::method_from_name(name)?;
    }
    let method_name = io::method_name(cfg.method);
    let hash = io::config_hash(&[
        ("command", "oracle".into()),
        ("modes", text.clone()),
        ("method", method_name.into()),
        ("t_end", args.t_end.to_string()),
        ("samples", args.samples.to_string()),
    ]);
    let times = uniform_grid(args.t_end, args.samples)?;
    let f = reduced_coherences(&cfg, &times)?;
    let path = out.write("oracle_factors.csv", &io::factors_to_csv(&f, Some(&hash)))?;
    Ok(json!({
        "command": "oracle",
        "config": hash,
        "method": method_name,
        "modes": cfg.modes.len(),
        "temperature": cfg.temperature,
        "n": f.dim(),
        "artifacts": { "factors": path },
    }))
}

fn pair_ohmic(out: &OutDir, args: &PairOhmicArgs) -> Result<Value> {
    if !(args.wc > 0.0) {
        return Err(Error::InvalidState(format!(
            "cutoff must be positive, got {}",
            args.wc
        )));
    }
    let hash = io::config_hash(&[
        ("command", "pipeline-pair-ohmic".into()),
        ("wc", args.wc.to_string()),
        ("grid", args.grid.to_string()),
        ("temperature", args.temperature.to_string()),
        ("coupling", args.coupling.to_string()),
    ]);
    let sd = SpectralDensity::ohmic(args.wc)?;
    let bath = BathParams {
        temperature: args.temperature,
        coupling_prefactor: args.coupling,
    };
    bath.validate()?;
    let t_max = 40.0 / args.wc;
    // sample every stride-th node of the wrapped transform lattice so the
    // forward check interpolates exactly at the measured times
    let stride = (args.grid / 128).max(1);
    let dt = stride as f64 * 2.0 * t_max / args.grid as f64;
    let times: Vec<f64> = (0..64).map(|k| k as f64 * dt).collect();
    let factors = qubit_pair_factors(&sd, &bath, &times)?;

    let mut cfg = PairInversionConfig::for_cutoff(args.wc);
    cfg.grid = args.grid;
    let (q, rep) = invert_pair_correlated(&factors, args.wc, &cfg)?;
    let result = nonclassicality_negativity(&q);
    let record = io::MeasureRecord::from_result(&result, Some(hash.clone()));

    let mut artifacts = BTreeMap::new();
    artifacts.insert(
        "factors",
        out.write("pair_factors.csv", &io::factors_to_csv(&factors, Some(&hash)))?,
    );
    artifacts.insert(
        "quasi",
        out.write("pair_quasi.csv", &io::quasi_to_csv(&q, Some(&hash))?)?,
    );
    artifacts.insert(
        "measure",
        out.write("pair_measure.json", &io::measure_to_json(&record)?)?,
    );

    Ok(json!({
        "command": "pipeline-pair-ohmic",
        "config": hash,
        "value": result.value,
        "min_density": q.min_density(),
        "mass": q.mass(),
        "inversion": report_value("pair", &rep),
        "artifacts": artifacts,
    }))
}

fn phase_sweep(out: &OutDir, args: &PhaseSweepArgs) -> Result<Value> {
    if args.steps < 2 {
        return Err(Error::InvalidState(format!(
            "a sweep needs at least two steps, got {}",
            args.steps
        )));
    }
    let modes_text = match &args.modes {
        Some(p) => Some(read_input(p)?),
        None => None,
    };
    let cfg = match &modes_text {
        Some(text) => io::modes_from_json(text)?,
        None => ModeConfig {
            modes: discretize_bath(&SpectralDensity::ohmic(1.0)?, 8)?.pair_modes(0.0),
            fock_cutoff: 8,
            temperature: 0.0,
            method: OracleMethod::AnalyticDisplacement,
        },
    };
    let mut fields: Vec<(&str, String)> = vec![
        ("command", "pipeline-phase-sweep".into()),
        ("steps", args.steps.to_string()),
        ("up_weight", args.up_weight.to_string()),
        ("t_end", args.t_end.to_string()),
        ("samples", args.samples.to_string()),
    ];
    if let Some(text) = &modes_text {
        fields.push(("modes", text.clone()));
    }
    let hash = io::config_hash(&fields);

    let times = uniform_grid(args.t_end, args.samples)?;
    let rs = root_system(2)?;
    let mut rows = Vec::with_capacity(args.steps);
    for step in 0..args.steps {
        let phi_rel = step as f64 * std::f64::consts::TAU / (args.steps - 1) as f64;
        let f = relative_phase_factor(phi_rel, &cfg, &times, args.up_weight)?;
        let (result, _) = nonclassicality_of_dynamics(&f, &rs)?;
        rows.push((phi_rel, result.value));
    }

    let mut csv = String::new();
    let _ = writeln!(csv, "# format {}", io::FORMAT_TAG);
    let _ = writeln!(csv, "# config {hash}");
    csv.push_str("phi_rel,value\n");
    for (phi_rel, value) in &rows {
        let _ = writeln!(csv, "{phi_rel},{value}");
    }
    let path = out.write("phase_sweep.csv", &csv)?;

    let values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(json!({
        "command": "pipeline-phase-sweep",
        "config": hash,
        "steps": args.steps,
        "min_value": lo,
        "max_value": hi,
        "artifacts": { "sweep": path },
    }))
}
