//! Configuration, stage wiring and artifact output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::birkhoff::{normal_form, reduce_to_minimal, NormalForm, ReducedForm};
use crate::dynamics::{simulate, FgrFrame, SimConfig, Sponge, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::fgr::{cancellation_checks, lyapunov_balance, rayleigh_quotients, BalanceReport, FgrPacket};
use crate::resonance::{build_index_sets, check_hypotheses, resonance_budget, verify_catalog, ResonanceCatalog, TOL_RES};
use crate::spectral::{build_operator, GridSpec, OperatorModel, PotentialPreset};

/// Environment variable overriding `[output] dir`.
pub const OUT_DIR_ENV: &str = "FGRNLS_OUT_DIR";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub half_length: f64,
    pub points: usize,
    /// Preset string such as `"poschl_teller a=1.5 kappa2=0.35"`.
    pub potential: String,
    /// Two-column `x, V` table; overrides `potential`.
    pub potential_file: Option<PathBuf>,
    /// Expected threshold; the model reports the mismatch.
    pub c: Option<f64>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { half_length: 40.0, points: 2048, potential: "poschl_teller a=1.5 kappa2=0.35".into(), potential_file: None, c: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingSection {
    pub gamma0: f64,
    pub gamma1: f64,
}

impl Default for ForcingSection {
    fn default() -> Self {
        ForcingSection { gamma0: 1.0, gamma1: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Defaults to `N + 1`.
    pub r_max: Option<u32>,
    /// Defaults to `N + 2`.
    pub n0: Option<u32>,
    /// Defaults to `2N + 4`.
    pub degree_cap: Option<u32>,
    pub tol_res: f64,
    pub rayleigh_samples: usize,
    pub rayleigh_radii: Vec<f64>,
    pub cancellation_samples: usize,
    pub seed: u64,
    /// RK4 steps for the coordinate change.
    pub flow_steps: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            r_max: None,
            n0: None,
            degree_cap: None,
            tol_res: TOL_RES,
            rayleigh_samples: 1000,
            rayleigh_radii: vec![0.01, 0.05, 0.1],
            cancellation_samples: 100,
            seed: 0,
            flow_steps: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSection {
    pub enabled: bool,
    #[serde(flatten)]
    pub config: SimConfig,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let config = SimConfig { sponge: Some(Sponge { start: 15.0, strength: 0.3 }), ..SimConfig::default() };
        SimulationSection { enabled: true, config }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelSection,
    pub forcing: ForcingSection,
    pub analysis: AnalysisSection,
    pub simulation: SimulationSection,
    pub output: OutputSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = PipelineConfig::from_toml(&text)?;
        if let Some(p) = &cfg.model.potential_file {
            if p.is_relative() {
                cfg.model.potential_file = Some(path.parent().unwrap_or(Path::new(".")).join(p));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.model.potential_file {
            if !p.exists() {
                return Err(Error::Config(format!("potential file {} does not exist", p.display())));
            }
        }
        if !(self.analysis.tol_res > 0.0) {
            return Err(Error::Config("tol_res must be positive".into()));
        }
        if self.analysis.rayleigh_radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::Config("Rayleigh radii must be positive".into()));
        }
        if self.analysis.flow_steps == 0 {
            return Err(Error::Config("flow_steps must be at least 1".into()));
        }
        self.simulation.config.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// SHA-256 of the canonical TOML echo.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `[output] dir` unless the environment overrides it.
    pub fn out_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output.dir.clone(),
        }
    }

    pub fn is_linear(&self) -> bool {
        self.forcing.gamma0 == 0.0 && self.forcing.gamma1 == 0.0
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig { gamma0: self.forcing.gamma0, gamma1: self.forcing.gamma1, ..self.simulation.config.clone() }
    }

    pub fn build_model(&self) -> Result<OperatorModel> {
        let grid = GridSpec::new(self.model.half_length, self.model.points).map_err(as_config)?;
        let preset = match &self.model.potential_file {
            Some(p) => PotentialPreset::from_csv(p)?,
            None => PotentialPreset::parse(&self.model.potential)?,
        };
        build_operator(grid, &preset, self.model.c)
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Input(s) => Error::Config(s),
        other => other,
    }
}

/// Stage names in execution order.
pub const STAGES: [&str; 5] = ["spectrum", "resonance", "normalform", "fgr", "simulate"];

/// Which stages a run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Spectrum,
    Resonance,
    NormalForm,
    Fgr,
    Simulate,
    Pipeline,
}

/// Accumulated manifest, written after every stage.
pub struct Manifest {
    path: PathBuf,
    value: Value,
}

impl Manifest {
    fn new(dir: &Path, cfg: &PipelineConfig, target: Target) -> Result<Manifest> {
        fs::create_dir_all(dir)?;
        let value = json!({
            "status": "incomplete",
            "target": format!("{target:?}").to_lowercase(),
            "config_hash": cfg.hash(),
            "config": cfg,
            "stages": {},
        });
        let m = Manifest { path: dir.join("manifest.json"), value };
        m.write()?;
        Ok(m)
    }

    fn stage(&mut self, name: &str, v: Value) -> Result<()> {
        self.value["stages"][name] = v;
        self.write()
    }

    fn write(&self) -> Result<()> {
        fs::write(&self.path, serde_json::to_string_pretty(&self.value).unwrap_or_default())?;
        Ok(())
    }

    pub fn value(&self) -> &Value {
        &self.value
    }
}

/// Everything the analysis stages produce.
pub struct Analysis {
    pub model: OperatorModel,
    pub catalog: Option<ResonanceCatalog>,
    pub normal_form: Option<NormalForm>,
    pub reduced: Option<ReducedForm>,
    pub frame: Option<FgrFrame>,
    pub trajectory: Option<TrajectoryRecord>,
    pub balance: Option<BalanceReport>,
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v).map_err(|e| Error::Numerical(e.to_string()))?)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Eigenvalue table `index, lambda, lambda - c, residual` as CSV text.
pub fn spectrum_csv(model: &OperatorModel) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "lambda", "lambda_minus_c"]).map_err(csv_err)?;
    for (j, l) in model.eigenvalues().iter().enumerate() {
        w.write_record([j.to_string(), format!("{l:.15e}"), format!("{:.15e}", l - model.c())]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

/// Trajectory samples as CSV with the balance residual when available.
pub fn trajectory_csv(rec: &TrajectoryRecord, balance: Option<&BalanceReport>) -> Result<String> {
    let n = rec.samples.first().map(|s| s.z.len()).unwrap_or(0);
    let with_zeta = rec.samples.first().is_some_and(|s| s.zeta.is_some());
    let mut head = vec!["t".to_string()];
    for j in 0..n {
        head.push(format!("re_z{j}"));
        head.push(format!("im_z{j}"));
    }
    if with_zeta {
        for j in 0..n {
            head.push(format!("re_zeta{j}"));
            head.push(format!("im_zeta{j}"));
        }
    }
    head.extend(["mass", "energy", "f_l2", "f_h1", "f_weighted", "g_weighted", "fgr_source", "balance_residual"].map(String::from));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&head).map_err(csv_err)?;
    let fmt = |x: f64| format!("{x:.12e}");
    let opt = |x: Option<f64>| x.map(fmt).unwrap_or_default();
    for (k, s) in rec.samples.iter().enumerate() {
        let mut row = vec![fmt(s.t)];
        let push = |row: &mut Vec<String>, v: &[C64]| {
            for x in v {
                row.push(fmt(x.re));
                row.push(fmt(x.im));
            }
        };
        push(&mut row, &s.z);
        if let Some(z) = &s.zeta {
            push(&mut row, z);
        }
        row.extend([fmt(s.mass), fmt(s.energy), fmt(s.f_l2), fmt(s.f_h1), fmt(s.f_weighted), opt(s.g_weighted), opt(s.fgr_source)]);
        let r = balance.and_then(|b| if k >= 1 { b.residual.get(k - 1).copied() } else { None });
        row.push(opt(r));
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

/// Outcome of a run: the manifest plus the first error, if any.
pub struct RunOutcome {
    pub manifest: Value,
    pub error: Option<Error>,
    pub analysis: Option<Analysis>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map(Error::exit_code).unwrap_or(0)
    }
}

/// Runs the stages required by `target`, writing artifacts and the manifest into the output directory.
pub fn run(cfg: &PipelineConfig, target: Target) -> RunOutcome {
    let dir = cfg.out_dir();
    let mut manifest = match Manifest::new(&dir, cfg, target) {
        Ok(m) => m,
        Err(e) => return RunOutcome { manifest: Value::Null, error: Some(e), analysis: None },
    };
    let mut analysis = None;
    let result = run_stages(cfg, target, &dir, &mut manifest, &mut analysis);
    match &result {
        Ok(()) => manifest.value["status"] = json!("complete"),
        Err(e) => {
            manifest.value["error"] = json!({ "stage": manifest.value["current_stage"].clone(), "message": e.to_string(), "exit_code": e.exit_code() });
        }
    }
    if let Some(obj) = manifest.value.as_object_mut() {
        obj.remove("current_stage");
    }
    let _ = manifest.write();
    RunOutcome { manifest: manifest.value, error: result.err(), analysis }
}

fn run_stages(cfg: &PipelineConfig, target: Target, dir: &Path, manifest: &mut Manifest, out: &mut Option<Analysis>) -> Result<()> {
    cfg.validate()?;
    let begin = |m: &mut Manifest, name: &str| -> Instant {
        m.value["current_stage"] = json!(name);
        Instant::now()
    };

    let t = begin(manifest, "spectrum");
    let model = cfg.build_model()?;
    fs::write(dir.join("spectrum.csv"), spectrum_csv(&model)?)?;
    manifest.stage(
        "spectrum",
        json!({
            "seconds": t.elapsed().as_secs_f64(),
            "c": model.c(),
            "lambda": model.eigenvalues(),
            "n_modes": model.eigenvalues().len(),
            "eigen_residual": model.eigen_residual(),
            "c_mismatch": model.shift_mismatch,
        }),
    )?;
    let an = out.insert(Analysis { model, catalog: None, normal_form: None, reduced: None, frame: None, trajectory: None, balance: None });
    if target == Target::Spectrum {
        return Ok(());
    }

    let linear = cfg.is_linear();
    if target != Target::Simulate {
        let t = begin(manifest, "resonance");
        let lambda = an.model.eigenvalues().to_vec();
        let c = an.model.c();
        let budget = match resonance_budget(&lambda, c) {
            Ok(b) => b,
            Err(e) => {
                manifest.stage("resonance", json!({ "verdict": "violated", "witness": { "hypothesis": "H6", "message": e.to_string() } }))?;
                return Err(e);
            }
        };
        let report = check_hypotheses(&lambda, c, &budget, cfg.analysis.tol_res);
        if !report.clean() {
            manifest.stage("resonance", json!({ "verdict": "violated", "budget": budget, "hypotheses": report }))?;
            let w = &report.violations[0];
            return Err(Error::Hypothesis(format!("({}) fails: witness mu = {:?}, m = {}, value = {:.3e}", w.hypothesis, w.mu, w.m, w.value)));
        }
        let catalog = build_index_sets(&lambda, c, &budget)?;
        verify_catalog(&catalog)?;
        write_json(&dir.join("resonance.json"), &json!({ "budget": budget, "hypotheses": report, "catalog": catalog }))?;
        manifest.stage(
            "resonance",
            json!({
                "seconds": t.elapsed().as_secs_f64(),
                "verdict": "clean",
                "N": budget.n,
                "big_m": catalog.big_m.len(),
                "minimal": catalog.minimal.len(),
                "shells": catalog.frequencies(),
                "min_gap": catalog.min_gap,
            }),
        )?;
        an.catalog = Some(catalog);
        if target == Target::Resonance {
            return Ok(());
        }

        let t = begin(manifest, "normalform");
        if linear {
            write_json(&dir.join("normalform.json"), &json!({ "rounds": [] }))?;
            manifest.stage("normalform", json!({ "skipped": "linear", "rounds": [] }))?;
        } else {
            let catalog = an.catalog.as_ref().expect("catalog");
            let n = catalog.budget.n;
            let r_max = cfg.analysis.r_max.unwrap_or(n + 1);
            let n0 = cfg.analysis.n0.unwrap_or(n + 2);
            let cap = cfg.analysis.degree_cap.unwrap_or(2 * n + 4);
            let nf = normal_form(&an.model, cfg.forcing.gamma0, cfg.forcing.gamma1, r_max, n0, cap)?;
            let reduced = reduce_to_minimal(&nf, catalog, &an.model)?;
            write_json(&dir.join("normalform.json"), &json!({ "r": nf.r, "n0": n0, "degree_cap": cap, "rounds": nf.rounds }))?;
            manifest.stage(
                "normalform",
                json!({
                    "seconds": t.elapsed().as_secs_f64(),
                    "r": nf.r,
                    "rounds": nf.rounds.len(),
                    "z_terms": nf.z.len(),
                    "rest_terms": nf.rest.len(),
                    "z0_terms": reduced.z0.len(),
                    "z1_terms": reduced.z1.len(),
                    "displaced": reduced.displaced,
                    "reality": reduced.reality,
                    "max_homological_residual": nf.rounds.iter().map(|r| r.homological_residual).fold(0.0, f64::max),
                    "ledger_violations": nf.rounds.iter().map(|r| r.audit.violations).sum::<usize>(),
                }),
            )?;
            an.normal_form = Some(nf);
            an.reduced = Some(reduced);
        }
        if target == Target::NormalForm {
            return Ok(());
        }

        let t = begin(manifest, "fgr");
        if linear {
            manifest.stage("fgr", json!({ "skipped": "linear" }))?;
        } else {
            let catalog = an.catalog.as_ref().expect("catalog");
            let nf = an.normal_form.as_ref().expect("normal form");
            let reduced = an.reduced.as_ref().expect("reduced form");
            let frame = FgrFrame::build(catalog, nf, reduced, &an.model, cfg.analysis.flow_steps)?;
            let n_modes = catalog.lambda.len();
            let rq = rayleigh_quotients(&frame.packets, n_modes, &cfg.analysis.rayleigh_radii, cfg.analysis.rayleigh_samples, cfg.analysis.seed)?;
            let zetas = sample_points(n_modes, cfg.analysis.cancellation_samples, cfg.analysis.seed ^ 0xc0ffee);
            let cancel = cancellation_checks(&reduced.z0, &frame.packets, &zetas, &an.model);
            write_rayleigh(dir, &rq.quotients)?;
            write_json(&dir.join("fgr.json"), &json!({ "packets": packet_summary(&frame.packets), "rayleigh": summary_of(&rq), "cancellation": cancel }))?;
            manifest.stage(
                "fgr",
                json!({
                    "seconds": t.elapsed().as_secs_f64(),
                    "h9_prime": if rq.holds { "holds" } else { "fails" },
                    "rayleigh_min": rq.min_quotient,
                    "rayleigh_max": rq.max_quotient,
                    "cancellation": cancel,
                }),
            )?;
            an.frame = Some(frame);
        }
        if target == Target::Fgr {
            return Ok(());
        }
    }

    if cfg.simulation.enabled {
        let t = begin(manifest, "simulate");
        let mut sim = cfg.sim_config();
        if sim.max_frequency.is_none() {
            sim.max_frequency = an.catalog.as_ref().and_then(|c| c.frequencies().last().copied());
        }
        let rec = simulate(&an.model, &sim, an.frame.as_ref())?;
        let balance = match &an.frame {
            Some(fr) if rec.samples.len() >= 3 => {
                let times: Vec<f64> = rec.samples.iter().map(|s| s.t).collect();
                let zetas: Vec<Vec<C64>> = rec.samples.iter().filter_map(|s| s.zeta.clone()).collect();
                Some(lyapunov_balance(&times, &zetas, &fr.packets)?)
            }
            _ => None,
        };
        fs::write(dir.join("trajectory.csv"), trajectory_csv(&rec, balance.as_ref())?)?;
        let last = rec.samples.len() - 1;
        manifest.stage(
            "simulate",
            json!({
                "seconds": t.elapsed().as_secs_f64(),
                "epsilon": rec.epsilon,
                "samples": rec.samples.len(),
                "stiffness": rec.stiffness,
                "t_wrap": rec.t_wrap,
                "beyond_wrap": rec.beyond_wrap,
                "mass_drift": rec.max_mass_drift(),
                "energy_drift": rec.max_energy_drift(),
                "mode_mass_ratio": rec.mode_mass(last) / rec.mode_mass(0).max(f64::MIN_POSITIVE),
                "strichartz": rec.strichartz,
                "resonant_l2": rec.resonant_l2,
                "g_l2": rec.g_l2,
                "f_l2_weighted": rec.f_l2_weighted,
                "profile_increments": rec.profile_increments(an.model.h()),
                "balance": balance.as_ref().map(|b| json!({ "residual_integral": b.residual_integral, "max_drift": b.max_drift, "source_integral": source_integral(b) })),
            }),
        )?;
        an.trajectory = Some(rec);
        an.balance = balance;
    } else {
        manifest.stage("simulate", json!({ "skipped": "disabled" }))?;
    }
    Ok(())
}

/// `int pi sum_w` delta-form `dt` by the trapezoid rule.
pub fn source_integral(b: &BalanceReport) -> f64 {
    let n = b.source.len();
    if n < 2 {
        return 0.0;
    }
    let dt = b.times.get(1).zip(b.times.first()).map(|(a, c)| a - c).unwrap_or(0.0);
    (0..n - 1).map(|k| 0.5 * (b.source[k] + b.source[k + 1]) * dt).sum()
}

fn sample_points(n: usize, count: usize, seed: u64) -> Vec<Vec<C64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| C64::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1))).collect()).collect()
}

fn packet_summary(packets: &[FgrPacket]) -> Value {
    packets
        .iter()
        .map(|p| {
            json!({
                "w": p.w,
                "members": p.members.iter().map(|m| &m.triple).collect::<Vec<_>>(),
                "gram_delta": p.gram_delta.iter().map(|r| r.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>()).collect::<Vec<_>>(),
                "gram_pv": p.gram_pv.iter().map(|r| r.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })
        })
        .collect()
}

fn summary_of(rq: &crate::fgr::RayleighReport) -> Value {
    json!({ "radii": rq.radii, "samples_per_radius": rq.samples_per_radius, "min": rq.min_quotient, "max": rq.max_quotient, "holds": rq.holds })
}

fn write_rayleigh(dir: &Path, q: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("rayleigh.csv")).map_err(csv_err)?;
    w.write_record(["radius", "quotient"]).map_err(csv_err)?;
    for (r, v) in q {
        w.write_record([format!("{r:.6e}"), format!("{v:.12e}")]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
