//! End-to-end analysis: parse, inventory, trace, graphs, classification and
//! measures, collected into one report.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::Value;

use crate::classify::{
    classify, component_mass, is_nonchaotic, simple_cycle_criterion, strebel_necessary, NonChaotic, Orientation, PotentialCount, SimpleCycleVerdict,
    Verdict,
};
use crate::error::{Error, Result};
use crate::measures::{
    build_levy_measure_tol, component_green_mass, default_probe_points, enumerate_real_measures, evaluate_transforms,
    reconstruct_check, verify_branch_equation, PoleMass, ResidualStats, SignedMeasure, TransformSample, BRANCH_TOL,
    DEFAULT_ATOMS, MASS_TOL,
};
use crate::qd::{CriticalInventory, DifferentialDoc, RationalQD};
use crate::topology::{
    build_critical_graph, build_reeb, fat_graphs, CriticalGraph, DomainKind, FatGraph, Instance, ReebGraph,
};
use crate::tracer::{TraceBudget, Tracer, TrajectorySegment};

/// Cycle-sum tolerance for Reeb graphs measured by probes.
pub const ANALYTIC_COCYCLE_TOL: f64 = 1e-6;
/// Relative agreement of the Green-oracle mass with the width balance.
pub const GREEN_TOL: f64 = 1e-3;

#[derive(Clone, Debug, serde::Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub budget: TraceBudget,
    pub cocycle_tol: f64,
    pub atoms: usize,
    pub branch_tol: f64,
    /// Sample points for transforms and the branch equation; a circle
    /// around the support when empty.
    pub probe_points: Vec<[f64; 2]>,
    pub measures: bool,
    pub green_check: bool,
    /// Fraction of the way across each domain at which the Green contour
    /// runs.
    pub green_depth: f64,
    pub enumerate_measures: bool,
    /// Orientation of the Reeb edges for the Levy measure, as a bit mask
    /// with bit `i` set when edge `i` is reversed. The positive orientation,
    /// or else the first gradient one, when absent.
    pub orientation_mask: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            budget: TraceBudget::default(),
            cocycle_tol: ANALYTIC_COCYCLE_TOL,
            atoms: DEFAULT_ATOMS,
            branch_tol: BRANCH_TOL,
            probe_points: Vec::new(),
            measures: true,
            green_check: true,
            green_depth: 0.3,
            enumerate_measures: true,
            orientation_mask: None,
        }
    }
}

/// Either a differential or a combinatorial instance.
#[derive(Clone, Debug)]
pub enum Input {
    Differential(DifferentialDoc),
    Abstract(Instance),
}

impl Input {
    /// A document with a `reeb` field is a combinatorial instance.
    pub fn from_json(text: &str) -> Result<Input> {
        let value: Value = serde_json::from_str(text)?;
        if value.get("reeb").is_some() {
            Ok(Input::Abstract(Instance::from_json(text)?))
        } else {
            Ok(Input::Differential(serde_json::from_value(value)?))
        }
    }
}

#[derive(Clone, Debug, serde::Serialize, Deserialize)]
pub struct TraceSummary {
    pub segments: usize,
    pub samples: usize,
    pub max_cell_crossings: usize,
    pub recurrent_suspects: Vec<usize>,
}

#[derive(Clone, Debug, serde::Serialize, Deserialize)]
pub struct GreenCheck {
    pub component: usize,
    pub green_mass: f64,
    pub width_balance: f64,
    pub relative_error: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, serde::Serialize, Deserialize)]
pub struct RealMeasureSummary {
    pub orientation: Orientation,
    pub positive: bool,
    pub planar_mass: f64,
    pub branch: ResidualStats,
}

#[derive(Clone, Debug, serde::Serialize, Deserialize)]
pub struct MeasureBlock {
    pub orientation: Orientation,
    pub atoms: usize,
    pub edge_coefficients: Vec<(usize, i32)>,
    pub pole_masses: Vec<PoleMass>,
    pub total_mass: f64,
    pub total_variation: f64,
    pub exact: bool,
    pub positive_on_graph: bool,
    pub positive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<ResidualStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruct: Option<bool>,
    pub transforms: Vec<TransformSample>,
    pub green: Vec<GreenCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub real_measures: Option<Vec<RealMeasureSummary>>,
}

#[derive(Clone, Debug, serde::Serialize, Deserialize)]
pub struct ReportError {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, Default, serde::Serialize, Deserialize)]
pub struct AnalysisReport {
    pub input: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inventory: Option<CriticalInventory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_graph: Option<CriticalGraph>,
    pub fat_graphs: Vec<FatGraph>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reeb: Option<ReebGraph>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simple_cycle: Option<SimpleCycleVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measures: Option<MeasureBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heine_stieltjes: Option<Value>,
    pub tolerances: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    /// Conventions that affected a reported number; they do not change the
    /// exit code.
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ReportError>,
}

impl AnalysisReport {
    /// 1 on error, 2 when warnings were raised, 0 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            1
        } else if !self.warnings.is_empty() {
            2
        } else {
            0
        }
    }

    fn fail(&mut self, e: Error) {
        self.error = Some(ReportError {
            stage: e.stage().to_string(),
            message: e.to_string(),
        });
    }

    /// Non-chaotic, Strebel, gradient and positive, in that order.
    pub fn chain(&self) -> Option<[Option<bool>; 4]> {
        self.verdict
            .as_ref()
            .map(|v| [Some(v.non_chaotic.value), Some(v.strebel), Some(v.gradient), v.positive])
    }
}

/// Objects that do not go into the report.
#[derive(Default)]
pub struct Artifacts {
    pub segments: Vec<TrajectorySegment>,
    pub measure: Option<SignedMeasure>,
}

pub fn run_pipeline(input: &Input, cfg: &PipelineConfig) -> (AnalysisReport, Artifacts) {
    let mut report = AnalysisReport::default();
    let mut art = Artifacts::default();
    report.tolerances = BTreeMap::from([
        ("cocycle".to_string(), cfg.cocycle_tol),
        ("branch_equation".to_string(), cfg.branch_tol),
        ("mass_exactness".to_string(), MASS_TOL),
        ("green_mass".to_string(), GREEN_TOL),
        ("trace_rtol".to_string(), cfg.budget.rtol),
    ]);
    match input {
        Input::Differential(doc) => {
            report.input = serde_json::to_value(doc).unwrap_or(Value::Null);
            if let Err(e) = analytic(doc, cfg, &mut report, &mut art) {
                report.fail(e);
            }
        }
        Input::Abstract(inst) => {
            report.input = Value::String("combinatorial instance".into());
            if let Err(e) = combinatorial(inst, cfg, &mut report) {
                report.fail(e);
            }
        }
    }
    (report, art)
}

fn combinatorial(inst: &Instance, cfg: &PipelineConfig, report: &mut AnalysisReport) -> Result<()> {
    report.fat_graphs = inst.fat_graphs.clone();
    report.reeb = Some(inst.reeb.clone());
    report.critical_graph = inst.critical_graph.clone();
    let fats = (!inst.fat_graphs.is_empty()).then_some(inst.fat_graphs.as_slice());
    let nc = NonChaotic {
        value: true,
        flagged: vec![],
    };
    let verdict = classify(&inst.reeb, fats, nc, None, cfg.cocycle_tol)?;
    note_verdict(&verdict, &inst.reeb, report);
    report.verdict = Some(verdict);
    if let Some(cg) = &inst.critical_graph {
        report.simple_cycle = simple_cycle_criterion(cg).ok();
    }
    if fats.is_none() {
        report.notes.push("no fat graphs given: positivity not decided".into());
    }
    Ok(())
}

fn note_verdict(v: &Verdict, reeb: &ReebGraph, report: &mut AnalysisReport) {
    let PotentialCount {
        with_leaf_bits,
        without_leaf_bits,
        ..
    } = v.potentials;
    if with_leaf_bits != without_leaf_bits {
        report.notes.push(format!(
            "potential count depends on the leaf convention: {with_leaf_bits} with leaf edges, {without_leaf_bits} without"
        ));
    }
    if reeb.edges.iter().any(|e| matches!(e.kind, DomainKind::Strip | DomainKind::End)) {
        report.warnings.push("strip or end domains present: infinite widths, no finite measure".into());
    }
}

fn chaotic_verdict(flagged: Vec<usize>) -> Verdict {
    Verdict {
        non_chaotic: NonChaotic { value: false, flagged },
        strebel: false,
        strebel_necessary: None,
        gradient: false,
        positive: Some(false),
        potentials: PotentialCount {
            with_leaf_bits: 0,
            without_leaf_bits: 0,
            flip_closed: true,
        },
        potential: None,
        positive_orientation: None,
        unsat: None,
        masses: None,
    }
}

fn analytic(doc: &DifferentialDoc, cfg: &PipelineConfig, report: &mut AnalysisReport, art: &mut Artifacts) -> Result<()> {
    let qd = RationalQD::from_doc(doc)?;
    let inv = qd.critical_inventory()?;
    report.inventory = Some(inv.clone());
    let tracer = Tracer::new(&qd, cfg.budget.clone())?;
    let launched = tracer.launch_all()?;
    art.segments = launched.iter().map(|(_, _, s)| s.clone()).collect();
    let nc = is_nonchaotic(&art.segments, &cfg.budget);
    let flagged = nc.flagged.clone();
    report.trace = Some(TraceSummary {
        segments: art.segments.len(),
        samples: art.segments.iter().map(|s| s.samples.len()).sum(),
        max_cell_crossings: art.segments.iter().map(|s| s.max_cell_crossings).max().unwrap_or(0),
        recurrent_suspects: flagged.clone(),
    });
    if !flagged.is_empty() {
        report.warnings.push(format!("recurrent trajectories {flagged:?}: differential treated as chaotic"));
        let mut v = chaotic_verdict(flagged);
        v.strebel_necessary = Some(strebel_necessary(&inv));
        report.verdict = Some(v);
        return Ok(());
    }
    let cg = build_critical_graph(&tracer, launched)?;
    let fats = fat_graphs(&cg);
    let reeb = build_reeb(&tracer, &cg, &fats)?;
    let verdict = classify(&reeb, Some(&fats), nc, Some(&inv), cfg.cocycle_tol)?;
    note_verdict(&verdict, &reeb, report);
    report.simple_cycle = simple_cycle_criterion(&cg).ok();
    report.critical_graph = Some(cg.clone());
    report.fat_graphs = fats.clone();
    report.reeb = Some(reeb.clone());
    let orientation = match cfg.orientation_mask {
        Some(mask) => Some(Orientation::from_mask(mask, reeb.edges.len())),
        None => verdict
            .positive_orientation
        .clone()
            .or_else(|| verdict.potential.as_ref().map(|p| p.orientation.clone())),
    };
    report.verdict = Some(verdict);
    if !cfg.measures {
        return Ok(());
    }
    let Some(o) = orientation else {
        report.warnings.push("no gradient orientation: no Levy measure".into());
        return Ok(());
    };
    let measure = match build_levy_measure_tol(&tracer, &cg, &reeb, &fats, &o, cfg.atoms, cfg.cocycle_tol) {
        Ok(m) => m,
        Err(e @ Error::InfiniteDensityEdge(_)) => {
            report.warnings.push(format!("measure not computed: {e}"));
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let points: Vec<Complex64> = if cfg.probe_points.is_empty() {
        default_probe_points(&measure, 8)
    } else {
        cfg.probe_points.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    };
    let transforms = evaluate_transforms(&measure, &points)?;
    let branch = match verify_branch_equation(&measure, &qd, &points, cfg.branch_tol) {
        Ok(r) => {
            if !r.pass {
                report.warnings.push(format!("branch equation residual {:e} above {:e}", r.max, r.tol));
            }
            Some(r)
        }
        Err(e @ Error::DegreeMismatch(_)) => {
            report.warnings.push(format!("branch equation not checked: {e}"));
            None
        }
        Err(e) => return Err(e),
    };
    let reconstruct = branch.is_some().then(|| reconstruct_check(&measure, &qd, &points));
    let mut green = Vec::new();
    if cfg.green_check {
        for alpha in 0..fats.len() {
            let expected = component_mass(&reeb, &o, alpha)?.to_f64();
            let got = component_green_mass(&tracer, &cg, &reeb, &fats, &measure, alpha, cfg.green_depth)?;
            let scale = expected.abs().max(measure.total_variation * 1e-3);
            let rel = (got - expected).abs() / scale;
            green.push(GreenCheck {
                component: alpha,
                green_mass: got,
                width_balance: expected,
                relative_error: rel,
                tol: GREEN_TOL,
                pass: rel <= GREEN_TOL,
            });
        }
    }
    if green.iter().any(|g| !g.pass) {
        report.warnings.push("Green-oracle mass disagrees with the width balance".into());
    }
    if !measure.is_exact(MASS_TOL) {
        report.warnings.push(format!("Levy measure total mass {:e} is not zero", measure.total_mass));
    }
    let real_measures = if cfg.enumerate_measures && reeb.is_strebel() && branch.is_some() {
        match enumerate_real_measures(&tracer, &cg, &reeb, &fats, cfg.atoms, cfg.branch_tol) {
            Ok(all) => Some(
                all.into_iter()
                    .map(|r| RealMeasureSummary {
                        planar_mass: r.measure.planar_mass(),
                        orientation: r.orientation,
                        positive: r.positive,
                        branch: r.branch,
                    })
                    .collect(),
            ),
            Err(e) => {
                report.warnings.push(format!("real measures not enumerated: {e}"));
                None
            }
        }
    } else {
        None
    };
    report.measures = Some(MeasureBlock {
        orientation: o,
        atoms: measure.atoms().count(),
        edge_coefficients: measure.edge_terms.iter().map(|t| (t.edge, t.coefficient)).collect(),
        pole_masses: measure.pole_masses.clone(),
        total_mass: measure.total_mass,
        total_variation: measure.total_variation,
        exact: measure.is_exact(MASS_TOL),
        positive_on_graph: measure.is_positive_on_graph(),
        positive: measure.is_positive(),
        branch,
        reconstruct,
        transforms,
        green,
        real_measures,
    });
    art.measure = Some(measure);
    Ok(())
}

/// Pretty JSON with every float written to 17 significant digits.
pub fn to_json_pinned<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Pinned(serde_json::ser::PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

struct Pinned<'a>(serde_json::ser::PrettyFormatter<'a>);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + std::io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl serde_json::ser::Formatter for Pinned<'_> {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        if v == 0.0 {
            w.write_all(b"0.0")
        } else {
            write!(w, "{v:.16e}")
        }
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        self.write_f64(w, v as f64)
    }

    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ARCSINE: &str = r#"{"numerator": [[1, 0]], "denominator": [[-1, 0], [0, 0], [1, 0]], "sign": -1}"#;

    const LOOP: &str = r#"{"reeb": {
        "vertices": [{"id": 0, "kind": "component"}, {"id": 1, "kind": "leaf", "at_infinity": true}],
        "edges": [
            {"id": 0, "kind": "ring", "tail": 0, "head": 0, "length": 1.5, "width": 1.0},
            {"id": 1, "kind": "circle", "tail": 0, "head": 1, "length": "inf", "width": 2.0}
        ]}}"#;

    fn quick() -> PipelineConfig {
        PipelineConfig {
            atoms: 2000,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn arcsine_report() {
        let (report, art) = run_pipeline(&Input::from_json(ARCSINE).unwrap(), &quick());
        assert!(report.error.is_none(), "{:?}", report.error);
        assert_eq!(report.chain().unwrap(), [Some(true); 4]);
        let m = report.measures.as_ref().unwrap();
        assert_eq!(m.real_measures.as_ref().unwrap().len(), 1);
        assert!(m.branch.as_ref().unwrap().pass);
        assert!(m.green.iter().all(|g| g.pass), "{:?}", m.green);
        assert!(art.measure.is_some());
        assert_eq!(report.exit_code(), 0, "{:?}", report.warnings);
    }

    #[test]
    fn loop_reeb_has_no_potential() {
        let (report, _) = run_pipeline(&Input::from_json(LOOP).unwrap(), &quick());
        let v = report.verdict.as_ref().unwrap();
        assert!(!v.gradient);
        assert_eq!(v.potentials.with_leaf_bits, 0);
    }

    #[test]
    fn report_round_trips_through_abstract_input() {
        let (report, _) = run_pipeline(&Input::from_json(ARCSINE).unwrap(), &quick());
        let text = to_json_pinned(&report).unwrap();
        let (again, _) = run_pipeline(&Input::from_json(&text).unwrap(), &quick());
        assert_eq!(report.chain(), again.chain());
    }

    #[test]
    fn pinned_floats() {
        let text = to_json_pinned(&[0.1, 0.0, -2.5e-300]).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("-2.5000000000000000e-300"));
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, [0.1, 0.0, -2.5e-300]);
    }
}
