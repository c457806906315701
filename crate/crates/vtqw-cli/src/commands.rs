//! One function per subcommand, plus the suite driver.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use vtqw_core::alg_compose::{decide_composed, ComposeConfig};
use vtqw_core::frameworks::{
    mnrs_monte_carlo, mnrs_walk, predicted_fastest, search_complexities, MnrsSetup, SearchInstance,
};
use vtqw_core::network::Target;
use vtqw_core::phase_estimation::{decide, PhaseEstimationInstance};
use vtqw_core::subroutine::{build_from_classical, AlphaSchedule, AlphaWeights, ClassicalInput};
use vtqw_core::walk_compose::{
    default_bounds, edge_transitions, ConditionThresholds, VertexSets, WalkInstance, WalkWeights,
};

use crate::documents::{vector, ComposeDoc, GraphDoc, MnrsDoc, PhaseDoc, SearchDoc, WalkDoc};
use crate::{read_document, Check, CliError, CliResult, Report, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    NetStats,
    Pe,
    Walk,
    Search,
    Mnrs,
    Compose,
}

impl ScenarioKind {
    pub fn command(self) -> &'static str {
        match self {
            Self::NetStats => "net stats",
            Self::Pe => "pe decide",
            Self::Walk => "walk run",
            Self::Search => "search compare",
            Self::Mnrs => "mnrs verify",
            Self::Compose => "compose decide",
        }
    }
}

pub fn run_scenario(kind: ScenarioKind, path: &Path, config: &RunConfig) -> CliResult<Report> {
    config.validate()?;
    let (checks, result, scenario, table) = match kind {
        ScenarioKind::NetStats => {
            let (doc, raw) = read_document::<GraphDoc>(path)?;
            let (checks, result) = net_stats(&doc, config)?;
            (checks, result, raw, None)
        }
        ScenarioKind::Pe => {
            let (doc, raw) = read_document::<PhaseDoc>(path)?;
            let (checks, result) = pe_decide(&doc, config)?;
            (checks, result, raw, None)
        }
        ScenarioKind::Walk => {
            let (doc, raw) = read_document::<WalkDoc>(path)?;
            let (checks, result) = walk_run(&doc, config)?;
            (checks, result, raw, None)
        }
        ScenarioKind::Search => {
            let (doc, raw) = read_document::<SearchDoc>(path)?;
            let (checks, result, table) = search_compare(&doc)?;
            (checks, result, raw, Some(table))
        }
        ScenarioKind::Mnrs => {
            let (doc, raw) = read_document::<MnrsDoc>(path)?;
            let (checks, result) = mnrs_verify(&doc, config)?;
            (checks, result, raw, None)
        }
        ScenarioKind::Compose => {
            let (doc, raw) = read_document::<ComposeDoc>(path)?;
            let (checks, result) = compose_decide(&doc, config)?;
            (checks, result, raw, None)
        }
    };
    Ok(Report {
        command: kind.command().into(),
        input: path.display().to_string(),
        config: config.clone(),
        scenario,
        checks,
        result,
        table,
    })
}

fn value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

fn net_stats(doc: &GraphDoc, config: &RunConfig) -> CliResult<(Vec<Check>, Value)> {
    let net = doc.network()?;
    let pi = net.stationary_distribution()?;
    let p = net.transition_matrix()?;
    let n = net.vertex_count();
    let mut balance: f64 = 0.0;
    for u in 0..n {
        for v in 0..n {
            balance = balance.max((pi.get(u) * p[(u, v)] - pi.get(v) * p[(v, u)]).abs());
        }
    }
    let tol = config.tolerances.construction;
    let mut checks = vec![Check::new("detailed balance", balance <= tol, format!("max residual {balance:e}"))];
    let mut result = json!({
        "vertices": n,
        "W": net.total_weight(),
        "pi": pi.0,
        "gap": net.spectral_gap()?,
        "detailed_balance_residual": balance,
    });
    let marked = doc.marked();
    if !marked.is_empty() {
        let sigma = doc.sigma()?;
        let r = net.effective_resistance(&sigma, &Target::Set(marked.clone()))?;
        let commute = net.commute_time(&sigma, &marked)?;
        let identity = (commute - 2.0 * net.total_weight() * r).abs();
        checks.push(Check::new(
            "commute time = 2WR",
            identity <= 1e-8 * commute.max(1.0),
            format!("residual {identity:e}"),
        ));
        result["resistance"] = json!({ "sigma": sigma.0, "M": marked, "R": r, "commute_time": commute });
    }
    Ok((checks, result))
}

fn pe_decide(doc: &PhaseDoc, config: &RunConfig) -> CliResult<(Vec<Check>, Value)> {
    let a: Vec<_> = doc.a_states.iter().map(|v| vector(v)).collect();
    let b: Vec<_> = doc.b_states.iter().map(|v| vector(v)).collect();
    let inst = PhaseEstimationInstance::new(vector(&doc.psi0), &a, &b, config.tolerances.drop)?;
    let d = decide(&inst, doc.c_minus, &config.decision())?;
    let mut checks = vec![Check::new(
        "walk operator unitary",
        d.unitarity_residual <= config.tolerances.construction,
        format!("residual {:e}", d.unitarity_residual),
    )];
    if let Some(want) = doc.expect {
        checks.push(Check::new("decision", d.positive == want, format!("expected {want}, got {}", d.positive)));
    }
    let result = json!({
        "decision": d.positive,
        "m_delta": d.m_delta,
        "delta": d.delta,
        "query_estimate": d.query_estimate,
        "phase_histogram": d.phase_histogram,
        "orthogonal_side": inst.orthogonal_side(),
        "diagnostics": d,
    });
    Ok((checks, result))
}

fn walk_run(doc: &WalkDoc, config: &RunConfig) -> CliResult<(Vec<Check>, Value)> {
    let net = doc.graph.network()?;
    let marked = doc.graph.marked();
    let sets = VertexSets {
        initial: doc.graph.initial(),
        checkable: doc.graph.checkable.clone().unwrap_or_else(|| marked.clone()),
        marked: marked.clone(),
    };
    let (sub, ext) = edge_transitions(&net, doc.transitions.clone())?;
    let schedule = config.alpha.or(doc.alpha).unwrap_or(AlphaSchedule::Const);
    let weights = WalkWeights {
        alpha: AlphaWeights::schedule(schedule, sub.horizon()),
        w0: doc.w0.unwrap_or(1.0),
        w_marked: doc.w_marked.unwrap_or(1.0),
    };
    let inst = WalkInstance::assemble(net, sets, doc.graph.sigma()?, sub, ext, weights)?;
    let (r, w) = match (doc.r, doc.w) {
        (Some(r), Some(w)) => (r, w),
        (r, w) if !marked.is_empty() => {
            let (r0, w0) = default_bounds(&inst)?;
            (r.unwrap_or(r0), w.unwrap_or(w0))
        }
        (Some(r), None) => (r, inst.n1_inclusive()),
        (None, _) => return Err(CliError::Scenario("R must be given when M is empty".into())),
    };
    let theta = if marked.is_empty() { None } else { Some(inst.optimal_flow()?) };
    let conditions = inst.check_conditions(theta.as_ref(), r, w, &ConditionThresholds::default());
    let run = inst.run(r, w, doc.setup_cost, &config.decision())?;
    let witness = match &theta {
        Some(theta) => {
            let pw = inst.positive_witness(theta)?;
            json!({
                "kind": "positive",
                "overlap": pw.overlap.re,
                "c_plus": pw.report.c_plus,
                "c_plus_bound": pw.c_plus_bound,
                "delta": pw.report.delta,
                "delta_bound": pw.delta_bound,
            })
        }
        None => {
            let nw = inst.negative_witness()?;
            json!({
                "kind": "negative",
                "c_minus": nw.report.c_minus,
                "c_minus_closed_form": nw.c_minus_closed_form,
                "delta_prime": nw.report.delta_prime,
                "delta_prime_bound": nw.delta_prime_bound,
                "decomposition_residual": nw.report.decomposition_residual,
            })
        }
    };
    let expect = doc.expect.unwrap_or(!marked.is_empty());
    let checks = vec![
        Check::new("conditions", conditions.passed(), format!("{conditions:?}")),
        Check::new(
            "decision",
            run.decision.positive == expect,
            format!("expected {expect}, got {} (m = {:e})", run.decision.positive, run.decision.m_delta),
        ),
        Check::new(
            "state orthogonality",
            inst.orthogonality_residual() <= config.tolerances.construction,
            format!("residual {:e}", inst.orthogonality_residual()),
        ),
    ];
    let result = json!({
        "decision": run.decision.positive,
        "alpha": schedule,
        "dimension": inst.dim(),
        "conditions": conditions,
        "witness_diagnostics": witness,
        "c_minus": run.c_minus,
        "cost_estimate": run.cost_estimate,
        "diagnostics": run.decision,
    });
    Ok((checks, result))
}

fn search_compare(doc: &SearchDoc) -> CliResult<(Vec<Check>, Value, String)> {
    let laws: Vec<ClassicalInput> = match (&doc.laws, &doc.times) {
        (Some(l), None) => l.clone(),
        (None, Some(t)) => t.iter().map(|&t| ClassicalInput::deterministic(t, 0)).collect(),
        _ => return Err(CliError::Scenario("give exactly one of `laws` and `times`".into())),
    };
    if doc.marked >= laws.len() {
        return Err(CliError::Scenario(format!("marked element {} does not exist", doc.marked)));
    }
    let sweep: Vec<Option<usize>> = match &doc.sweep {
        Some(times) => times.iter().map(|&t| Some(t)).collect(),
        None => vec![None],
    };
    let name = |s: AlphaSchedule| value(&s).as_str().unwrap_or_default().to_string();
    let mut table = csv::Writer::from_writer(Vec::new());
    table.write_record(["marked_time", "linear", "constant", "inverse", "fastest", "predicted"]).map_err(csv_error)?;
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for t in sweep {
        let mut laws = laws.clone();
        if let Some(t) = t {
            laws[doc.marked] = ClassicalInput::deterministic(t, 0);
        }
        let pi = vtqw_core::network::Distribution::new(doc.pi.clone())?;
        let eps = doc.epsilon.unwrap_or_else(|| pi.get(doc.marked));
        let si = SearchInstance::new(pi, laws, eps)?;
        let costs = search_complexities(&si, &[doc.marked])?;
        let general = costs.general;
        let predicted = if si.is_zero_variance() { Some(predicted_fastest(&si, doc.marked)?) } else { None };
        let marked_time = si.mean_time(doc.marked);
        let predicted_names = predicted.as_ref().map(|p| p.iter().map(|&s| name(s)).collect::<Vec<_>>().join("|"));
        table
            .write_record([
                marked_time.to_string(),
                general.linear.to_string(),
                general.constant.to_string(),
                general.inverse.to_string(),
                name(costs.fastest),
                predicted_names.unwrap_or_default(),
            ])
            .map_err(csv_error)?;
        if let Some(p) = &predicted {
            let best = general.get(costs.fastest);
            let ok = p.iter().any(|&s| general.get(s) <= best * (1.0 + 1e-12));
            checks.push(Check::new(
                "regime rule",
                ok,
                format!("marked time {marked_time}: predicted {p:?}, fastest {:?}", costs.fastest),
            ));
        }
        rows.push(json!({ "marked_time": marked_time, "costs": costs, "predicted": predicted }));
    }
    let table = table.into_inner().map_err(|e| csv_error(e.into_error().into()))?;
    Ok((checks, json!({ "rows": rows }), String::from_utf8(table).expect("CSV fields are UTF-8")))
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Scenario(format!("writing CSV: {e}"))
}

fn mnrs_verify(doc: &MnrsDoc, config: &RunConfig) -> CliResult<(Vec<Check>, Value)> {
    let setup = MnrsSetup {
        network: doc.graph.network()?,
        marked: doc.graph.marked(),
        transition_laws: doc.transition_laws.clone(),
        check_laws: doc.check_laws.clone(),
        known_times: doc.known_times,
        epsilon: doc.epsilon,
        gap: doc.gap,
    };
    let walk = mnrs_walk(&setup)?;
    let report = walk.report;
    let mut checks = Vec::new();
    let mut monte_carlo = Value::Null;
    if let Some(flow) = &report.flow {
        checks.push(Check::new("inequality margin", flow.margin >= 0.0, format!("margin {:e}", flow.margin)));
        let gap = (flow.energy - flow.energy_identity).abs();
        checks.push(Check::new("energy identity", gap <= 1e-9 * flow.energy.max(1.0), format!("residual {gap:e}")));
        if doc.monte_carlo_walks > 0 {
            let mc = mnrs_monte_carlo(
                &setup.network,
                &setup.marked,
                flow.halt_probability,
                doc.monte_carlo_walks,
                config.seed,
                1_000_000,
            )?;
            let agree = mc.steps.agrees_with(flow.expected_steps, 3.0)
                && mc.leaves.iter().zip(&flow.expected_leaves).all(|(e, &x)| e.agrees_with(x, 3.0));
            checks.push(Check::new("visit counts within 3 standard errors", agree, format!("steps {:?}", mc.steps)));
            monte_carlo = value(&mc);
        }
    }
    Ok((checks, json!({ "report": report, "monte_carlo": monte_carlo })))
}

fn compose_decide(doc: &ComposeDoc, config: &RunConfig) -> CliResult<(Vec<Check>, Value)> {
    let outer = doc.outer.build()?;
    let (sub, ext) = build_from_classical(&doc.inner)?;
    let compose = ComposeConfig {
        decision: config.decision(),
        eta: config.eta,
        allow_large_error: doc.allow_large_error,
        audit: true,
    };
    let d = decide_composed(&outer, &sub, &ext, &compose)?;
    let mut checks = vec![
        Check::new("decision", d.output == d.expected, format!("expected {}, got {}", d.expected, d.output)),
        Check::new(
            "bucket orthogonality",
            d.gram_residual.0.max(d.gram_residual.1) <= 1e-10,
            format!("residuals {:e}, {:e}", d.gram_residual.0, d.gram_residual.1),
        ),
    ];
    if let Some(a) = &d.audit {
        checks.push(Check::new("margin", !a.margin_violation, format!("certified bound {:e}", a.certified_bound)));
    }
    let result = json!({
        "output": d.output,
        "expected": d.expected,
        "q_bar": d.q_bar,
        "T_avg": d.parameters.t_avg,
        "eps_avg": d.parameters.eps_avg,
        "parameters": d.parameters,
        "cost_estimate": d.cost_estimate,
        "decision_diagnostics": {
            "dimension": d.dimension,
            "blocks": d.blocks,
            "gram_residual": d.gram_residual,
            "decision": d.decision,
            "audit": d.audit,
        },
    });
    Ok((checks, result))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: ScenarioKind,
    /// Relative to the manifest's directory.
    pub file: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenarios: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub name: String,
    pub kind: ScenarioKind,
    pub passed: bool,
    pub failures: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub manifest: String,
    pub config: RunConfig,
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub warnings: Vec<String>,
    pub results: Vec<SuiteEntry>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

/// Runs every scenario of a manifest. Core errors inside a scenario count as
/// failures; a missing scenario file aborts the run.
pub fn run_suite(path: &Path, config: &RunConfig) -> CliResult<SuiteReport> {
    config.validate()?;
    let (manifest, _) = read_document::<Manifest>(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut warnings = Vec::new();
    if manifest.scenarios.is_empty() {
        warnings.push("manifest lists no scenarios".to_string());
    }
    let mut results = Vec::new();
    for entry in &manifest.scenarios {
        let file = base.join(&entry.file);
        if !file.is_file() {
            return Err(CliError::Io { path: file, message: "scenario file not found".into() });
        }
        let failures = match run_scenario(entry.kind, &file, config) {
            Ok(report) => report.failures(),
            Err(CliError::Core(e)) => vec![format!("error: {e}")],
            Err(e) => return Err(e),
        };
        results.push(SuiteEntry { name: entry.name.clone(), kind: entry.kind, passed: failures.is_empty(), failures });
    }
    let passed = results.iter().filter(|r| r.passed).count();
    Ok(SuiteReport {
        manifest: path.display().to_string(),
        config: config.clone(),
        total: results.len(),
        passed,
        failed: results.len() - passed,
        warnings,
        results,
    })
}
