use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sobolev_trace::extension::{
    lipschitz_seminorm, mcshane_extend, PartitionOfUnity, WhitneyExtension,
};
use sobolev_trace::geometry::whitney_decompose;
use sobolev_trace::maximal::{a1_norm, hl_maximal, A1Report};
use sobolev_trace::metrics::{DistanceTable, GeodesicGraph, QuasiMetricSpec};
use sobolev_trace::poly::Basis;
use sobolev_trace::sobolev::sobolev_seminorm;
use sobolev_trace::trace::{jet_trace_norm, trace_norm_l1p, TraceReport};
use sobolev_trace::{Grid, PointSet, ScalarField, WeightField};

use crate::config::{Data, Experiment, Provenance};
use crate::CliError;

/// Relative slack for comparisons that hold exactly in real arithmetic.
pub const ROUNDOFF: f64 = 1e-12;

/// The exponents of the metric stage: `q = (n+p)/2` for the pre-metric and
/// `theta = (q+p)/2` for the maximal-function weight, so `n < q < theta < p`.
pub fn exponents(n: usize, p: f64) -> (f64, f64) {
    let q = 0.5 * (n as f64 + p);
    (q, 0.5 * (q + p))
}

/// `M[g^theta]^{1/theta}`; `None` when `g` vanishes identically.
pub fn maximal_weight(g: &ScalarField, theta: f64) -> Result<Option<WeightField>, CliError> {
    if g.values().iter().all(|&v| v == 0.0) {
        return Ok(None);
    }
    if let Some(v) = g.values().iter().find(|v| !v.is_finite()) {
        return Err(CliError::Failed(format!("sharp field is not finite ({v})")));
    }
    let m = hl_maximal(&g.map(|v| v.powf(theta))?);
    Ok(Some(WeightField::new(m.map(|v| v.powf(1.0 / theta))?)?))
}

/// The weight, its pre-metric and the all-pairs geodesic table over grid and `E`.
#[derive(Clone, Debug)]
pub struct MetricStage {
    pub weight: WeightField,
    pub spec: QuasiMetricSpec,
    pub table: DistanceTable,
    /// Table index of every point of `E`.
    pub e_nodes: Vec<usize>,
    /// A1 report of `h^q`.
    pub a1: A1Report,
    /// `max delta_q / d_q` over all pairs of the table.
    pub geodesic_ratio: f64,
}

pub fn metric_stage(
    h: WeightField,
    q: f64,
    hop_radius: usize,
    e: &PointSet,
) -> Result<MetricStage, CliError> {
    let spec = QuasiMetricSpec::new(h.clone(), q)?;
    let a1 = a1_norm(&spec.power_weight()?);
    let graph = GeodesicGraph::with_points(&spec, hop_radius, Some(e))?;
    let e_nodes = e
        .points()
        .iter()
        .map(|x| graph.index_of(x, spec.grid()).expect("registered point"))
        .collect();
    let table = graph.all_pairs(&spec)?;
    let geodesic_ratio = table.max_ratio().0;
    Ok(MetricStage {
        weight: h,
        spec,
        table,
        e_nodes,
        a1,
        geodesic_ratio,
    })
}

/// Everything a pipeline run reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSummary {
    pub pipeline: String,
    pub provenance: Provenance,
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub q: f64,
    pub theta: f64,
    pub grid_per_axis: usize,
    pub spacing: f64,
    pub hop_radius: usize,
    /// `I_p(f;E)` or `N_{m,p}(J)` over the box.
    pub trace_functional: f64,
    pub trace_tail_bound: f64,
    /// `None` when the data has no oscillation (the weight vanishes).
    pub a1_norm: Option<f64>,
    pub geodesic_ratio: Option<f64>,
    /// Largest `|f(x) - f(y)| / delta_q(x, y)` over pairs of `E`.
    pub set_constant: Option<f64>,
    /// The Lipschitz constant used by the McShane step.
    pub lipschitz_constant: Option<f64>,
    /// Measured `d_q`-Lipschitz seminorm of `F` over all table pairs.
    pub extension_lipschitz: Option<f64>,
    /// `||nabla^m F||_p` of the extension on the grid.
    pub extension_seminorm: f64,
    /// `||nabla^m F_0||_p` of the generating function, when there is one.
    pub source_seminorm: Option<f64>,
    pub extension_over_trace: Option<f64>,
    pub trace_over_source: Option<f64>,
    pub extension_over_source: Option<f64>,
    /// `max |F - f|` on `E`.
    pub error_on_set: f64,
    /// Largest `|D^beta_h (F - P_x)(x)|` over `x` in `E` and `|beta| <= m - 1`.
    pub boundary_error: Option<f64>,
    pub boundary_tolerance: Option<f64>,
    /// `max |F - P|` over usable nodes for a global polynomial.
    pub polynomial_error: Option<f64>,
    pub whitney_cubes: Option<usize>,
    pub usable_nodes: Option<usize>,
    pub failures: Vec<String>,
}

/// Output of a pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineResult {
    /// `F` on the grid nodes.
    pub extension: ScalarField,
    /// `F` at the points of `E`.
    pub extension_on_set: Vec<f64>,
    pub trace: TraceReport,
    pub metric: Option<MetricStage>,
    pub summary: PipelineSummary,
}

impl PipelineResult {
    pub fn passed(&self) -> bool {
        self.summary.failures.is_empty()
    }

    /// Writes `extension.csv`, `sharp.csv`, `summary.json` and, if present, `weight.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        self.extension.write_csv(&dir.join("extension.csv"))?;
        self.trace.write_csv(&dir.join("sharp.csv"))?;
        if let Some(m) = &self.metric {
            m.weight.field().write_csv(&dir.join("weight.csv"))?;
        }
        fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&self.summary)?,
        )?;
        Ok(())
    }
}

fn ratio(a: f64, b: f64) -> Option<f64> {
    (b > 0.0).then(|| a / b)
}

fn source_seminorm(data: &Data, grid: &Grid, m: usize, p: f64) -> Result<Option<f64>, CliError> {
    match data {
        Data::Function(f) => Ok(Some(sobolev_seminorm(&f.sample(grid)?, m, p)?.seminorm)),
        Data::Polynomial(poly) => {
            let field = ScalarField::from_fn(grid, |x| poly.eval(x))?;
            Ok(Some(sobolev_seminorm(&field, m, p)?.seminorm))
        }
        _ => Ok(None),
    }
}

/// The scalar extension: sharp field, weight, geodesic metric, McShane extension.
pub fn run_l1p_pipeline(exp: &Experiment) -> Result<PipelineResult, CliError> {
    let cfg = &exp.config;
    if cfg.m != 1 {
        return Err(CliError::Config(format!(
            "the scalar pipeline needs m = 1, got {}",
            cfg.m
        )));
    }
    let (n, p) = (cfg.n, cfg.p);
    let (q, theta) = exponents(n, p);
    let f = exp.values();
    let grid = &exp.grid;
    let trace = trace_norm_l1p(&f, &exp.e, p, &exp.bx, grid)?;
    let mut failures = Vec::new();

    let (extension, on_set, metric, set_constant, lipschitz, measured) =
        match maximal_weight(&trace.sharp_field, theta)? {
            None => {
                let c = f[0];
                let field = ScalarField::constant(grid, c)?;
                (field, vec![c; f.len()], None, None, None, None)
            }
            Some(h) => {
                let stage = metric_stage(h, q, cfg.hop_radius, &exp.e)?;
                let mut kappa: f64 = 0.0;
                for a in 0..f.len() {
                    for b in a + 1..f.len() {
                        let d = stage.table.delta(stage.e_nodes[a], stage.e_nodes[b]);
                        kappa = kappa.max((f[a] - f[b]).abs() / d);
                    }
                }
                let l = stage.geodesic_ratio * kappa;
                let values = mcshane_extend(&f, &stage.e_nodes, &stage.table, l)?;
                let (seminorm, i, j) = lipschitz_seminorm(&values, &stage.table);
                if seminorm > l * (1.0 + ROUNDOFF) {
                    failures.push(format!(
                        "extension has d-Lipschitz ratio {seminorm} > {l} at ({i}, {j})"
                    ));
                }
                let on_set: Vec<f64> = stage.e_nodes.iter().map(|&k| values[k]).collect();
                let field = ScalarField::new(grid.clone(), values[..grid.len()].to_vec())?;
                (
                    field,
                    on_set,
                    Some(stage),
                    Some(kappa),
                    Some(l),
                    Some(seminorm),
                )
            }
        };
    let error_on_set = on_set
        .iter()
        .zip(&f)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if error_on_set != 0.0 {
        failures.push(format!(
            "extension differs from the data on E by {error_on_set}"
        ));
    }
    let ext_norm = sobolev_seminorm(&extension, 1, p)?.seminorm;
    let src = source_seminorm(&exp.data, grid, 1, p)?;
    let i_p = trace.functional_value;
    let summary = PipelineSummary {
        pipeline: "l1p".into(),
        provenance: cfg.provenance(),
        n,
        m: 1,
        p,
        q,
        theta,
        grid_per_axis: cfg.grid,
        spacing: grid.spacing(),
        hop_radius: cfg.hop_radius,
        trace_functional: i_p,
        trace_tail_bound: trace.tail_bound,
        a1_norm: metric.as_ref().map(|s| s.a1.norm_estimate),
        geodesic_ratio: metric.as_ref().map(|s| s.geodesic_ratio),
        set_constant,
        lipschitz_constant: lipschitz,
        extension_lipschitz: measured,
        extension_seminorm: ext_norm,
        source_seminorm: src,
        extension_over_trace: ratio(ext_norm, i_p),
        trace_over_source: src.and_then(|s| ratio(i_p, s)),
        extension_over_source: src.and_then(|s| ratio(ext_norm, s)),
        error_on_set,
        boundary_error: None,
        boundary_tolerance: None,
        polynomial_error: None,
        whitney_cubes: None,
        usable_nodes: None,
        failures,
    };
    Ok(PipelineResult {
        extension,
        extension_on_set: on_set,
        trace,
        metric,
        summary,
    })
}

/// The jet extension: jet sharp field, weight, geodesic metric, Whitney extension.
pub fn run_jet_pipeline(exp: &Experiment) -> Result<PipelineResult, CliError> {
    let cfg = &exp.config;
    let (n, m, p) = (cfg.n, cfg.m, cfg.p);
    let (q, theta) = exponents(n, p);
    let grid = &exp.grid;
    let jet = exp.jet()?;
    if jet.m() != m || jet.points().dim() != n {
        return Err(CliError::Config(
            "jet dimensions do not match the config".into(),
        ));
    }
    let trace = jet_trace_norm(&jet, p, &exp.bx, grid)?;
    let metric = match maximal_weight(&trace.sharp_field, theta)? {
        Some(h) => Some(metric_stage(h, q, cfg.hop_radius, &exp.e)?),
        None => None,
    };

    let w = whitney_decompose(&exp.e, &exp.bx, cfg.whitney_levels)?;
    let partition = PartitionOfUnity::new(&w);
    let ext = WhitneyExtension::new(&jet, &partition)?;
    let field = ext.on_grid(grid, m)?;
    let usable: Vec<usize> = (0..grid.len()).filter(|&i| field.usable(i)).collect();

    let basis = Basis::get(n, m);
    let top: Vec<&ScalarField> = basis
        .of_degree(m)
        .map(|k| {
            field
                .derivative(&basis.indices()[k])
                .expect("derivative of order m")
        })
        .collect();
    let mut acc = 0.0;
    for &i in &usable {
        let s: f64 = top.iter().map(|g| g.get(i).powi(2)).sum();
        acc += s.sqrt().powf(p);
    }
    let ext_norm = (acc * grid.cell_volume()).powf(1.0 / p);

    let mut failures = Vec::new();
    let h = grid.spacing();
    let tolerance = 10.0 * h * h;
    let mut boundary: f64 = 0.0;
    for i in 0..jet.points().len() {
        for beta in Basis::get(n, m - 1).indices() {
            match ext.boundary_derivative_error(i, beta, h) {
                Some(err) => boundary = boundary.max(err),
                None => failures.push(format!(
                    "difference stencil at point {i} leaves the covered region"
                )),
            }
        }
    }
    if boundary > tolerance {
        failures.push(format!(
            "jet reproduction error {boundary} exceeds {tolerance}"
        ));
    }

    let polynomial_error = match &exp.data {
        Data::Polynomial(poly) => {
            let values = field.values();
            let err = usable
                .iter()
                .map(|&i| (values.get(i) - poly.eval(&grid.node(i))).abs())
                .fold(0.0, f64::max);
            if err > 1e-9 {
                failures.push(format!("polynomial reproduced with error {err}"));
            }
            Some(err)
        }
        _ => None,
    };

    let src = match &exp.data {
        Data::Function(f) => {
            let mut acc = 0.0;
            for x in grid.nodes() {
                acc += f.derivative_norm(m, &x).powf(p);
            }
            Some((acc * grid.cell_volume()).powf(1.0 / p))
        }
        Data::Polynomial(_) => source_seminorm(&exp.data, grid, m, p)?,
        _ => None,
    };
    let on_set: Vec<f64> = jet
        .polys()
        .iter()
        .zip(jet.points().points())
        .map(|(pl, x)| pl.eval(x))
        .collect();
    let nu = trace.functional_value;
    let summary = PipelineSummary {
        pipeline: "jet".into(),
        provenance: cfg.provenance(),
        n,
        m,
        p,
        q,
        theta,
        grid_per_axis: cfg.grid,
        spacing: h,
        hop_radius: cfg.hop_radius,
        trace_functional: nu,
        trace_tail_bound: trace.tail_bound,
        a1_norm: metric.as_ref().map(|s| s.a1.norm_estimate),
        geodesic_ratio: metric.as_ref().map(|s| s.geodesic_ratio),
        set_constant: None,
        lipschitz_constant: None,
        extension_lipschitz: None,
        extension_seminorm: ext_norm,
        source_seminorm: src,
        extension_over_trace: ratio(ext_norm, nu),
        trace_over_source: src.and_then(|s| ratio(nu, s)),
        extension_over_source: src.and_then(|s| ratio(ext_norm, s)),
        error_on_set: 0.0,
        boundary_error: Some(boundary),
        boundary_tolerance: Some(tolerance),
        polynomial_error,
        whitney_cubes: Some(w.len()),
        usable_nodes: Some(usable.len()),
        failures,
    };
    Ok(PipelineResult {
        extension: field.values().clone(),
        extension_on_set: on_set,
        trace,
        metric,
        summary,
    })
}
