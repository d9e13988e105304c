//! Fully-connected networks with Swish activation, the optional
//! Fourier-feature input mapping, and the five output arrangements.
//!
//! Evaluation happens on the expression graph in [`crate::graph`]. Each
//! network quantity is carried as a set of channels (value, d/dx, d/dy and
//! optionally the three second partials) propagated together through every
//! layer: affine layers act on each channel, activations combine them by
//! the chain rule. Spatial derivatives are therefore exact to round-off,
//! and since the channels are graph nodes, any scalar loss built from them
//! (including PDE residuals with second derivatives) has an exact parameter
//! gradient via one reverse sweep.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::graph::{Graph, TapeExpr};
use crate::scalar::{Jet1, Jet2};
use crate::{Error, Result};

/// The five output arrangements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Fcnn {
    I,
    II,
    III,
    IV,
    V,
}

impl fmt::Display for Fcnn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Fcnn::I => "I",
            Fcnn::II => "II",
            Fcnn::III => "III",
            Fcnn::IV => "IV",
            Fcnn::V => "V",
        };
        f.write_str(s)
    }
}

impl FromStr for Fcnn {
    type Err = Error;
    fn from_str(s: &str) -> Result<Fcnn> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(Fcnn::I),
            "II" | "2" => Ok(Fcnn::II),
            "III" | "3" => Ok(Fcnn::III),
            "IV" | "4" => Ok(Fcnn::IV),
            "V" | "5" => Ok(Fcnn::V),
            other => Err(Error::invalid(format!(
                "unknown network arrangement {other:?} (expected I..V)"
            ))),
        }
    }
}

/// Network quantity behind an output column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputId {
    Ux,
    Uy,
    E,
    /// Raw stress component, row-major index 0..4 = (00, 01, 10, 11).
    /// Present only for arrangements I and II.
    P(usize),
}

/// Architecture description: arrangement, input mapping, init seed, and
/// optional width/depth overrides (diagnostic knobs; `None` keeps each
/// arrangement's published layer plan).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NetworkSpec {
    pub fcnn: Fcnn,
    pub fourier: bool,
    pub seed: u64,
    pub width_override: Option<usize>,
    pub depth_override: Option<usize>,
}

impl NetworkSpec {
    pub fn new(fcnn: Fcnn, fourier: bool, seed: u64) -> NetworkSpec {
        NetworkSpec {
            fcnn,
            fourier,
            seed,
            width_override: None,
            depth_override: None,
        }
    }

    pub fn with_width(mut self, width: usize) -> NetworkSpec {
        self.width_override = Some(width);
        self
    }

    pub fn with_depth(mut self, depth: usize) -> NetworkSpec {
        self.depth_override = Some(depth);
        self
    }

    pub fn input_dim(&self) -> usize {
        if self.fourier {
            12
        } else {
            2
        }
    }

    fn validate(&self) -> Result<()> {
        if self.width_override == Some(0) || self.depth_override == Some(0) {
            return Err(Error::invalid("width/depth overrides must be at least 1"));
        }
        Ok(())
    }

    /// Subnetwork layout, in parameter order.
    pub(crate) fn units(&self) -> Vec<UnitPlan> {
        let d = self.input_dim();
        let w = |dflt: usize| self.width_override.unwrap_or(dflt);
        let dep = |dflt: usize| self.depth_override.unwrap_or(dflt);
        match self.fcnn {
            Fcnn::I => {
                let tw = w(50);
                let sw = w(75);
                vec![
                    UnitPlan::trunk(Source::Coords, chain(d, tw, dep(2))),
                    UnitPlan::headed(Source::Unit(0), chain(tw, tw, dep(2)), 1, vec![OutputId::Ux]),
                    UnitPlan::headed(Source::Unit(0), chain(tw, tw, dep(2)), 1, vec![OutputId::Uy]),
                    UnitPlan::headed(Source::Coords, chain(d, sw, dep(5)), 5, stress_outputs()),
                ]
            }
            Fcnn::II => {
                let sw = w(75);
                vec![
                    UnitPlan::headed(
                        Source::Coords,
                        chain(d, sw, dep(5)),
                        2,
                        vec![OutputId::Ux, OutputId::Uy],
                    ),
                    UnitPlan::headed(Source::Coords, chain(d, sw, dep(5)), 5, stress_outputs()),
                ]
            }
            Fcnn::III => {
                let bw = w(25);
                let branch = |id| {
                    UnitPlan::headed(Source::Unit(0), chain(bw, bw, dep(3)), 1, vec![id])
                };
                vec![
                    UnitPlan::trunk(Source::Coords, chain(d, bw, dep(2))),
                    branch(OutputId::Ux),
                    branch(OutputId::Uy),
                    branch(OutputId::E),
                ]
            }
            Fcnn::IV => {
                let bw = w(25);
                let net = |id| UnitPlan::headed(Source::Coords, chain(d, bw, dep(5)), 1, vec![id]);
                vec![net(OutputId::Ux), net(OutputId::Uy), net(OutputId::E)]
            }
            Fcnn::V => {
                let sw = w(75);
                vec![UnitPlan::headed(
                    Source::Coords,
                    chain(d, sw, dep(5)),
                    3,
                    vec![OutputId::Ux, OutputId::Uy, OutputId::E],
                )]
            }
        }
    }

    /// Output columns in evaluation order.
    pub fn output_ids(&self) -> Vec<OutputId> {
        self.units()
            .iter()
            .flat_map(|u| u.outputs.iter().copied())
            .collect()
    }

    /// Whether the arrangement carries raw stress outputs N_P.
    pub fn has_stress_outputs(&self) -> bool {
        matches!(self.fcnn, Fcnn::I | Fcnn::II)
    }

    pub fn param_count(&self) -> usize {
        self.units().iter().map(UnitPlan::param_count).sum()
    }

    /// Flat parameter slices per subnetwork, for branch-independence checks.
    pub fn unit_param_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut off = 0;
        for unit in self.units() {
            let n = unit.param_count();
            out.push(off..off + n);
            off += n;
        }
        out
    }

    /// Canonical architecture string; its hash keys checkpoints.
    pub fn describe(&self) -> String {
        let layers: Vec<String> = self
            .units()
            .iter()
            .map(|u| {
                let src = match u.source {
                    Source::Coords => "coords".to_string(),
                    Source::Unit(i) => format!("unit{i}"),
                };
                let dims: Vec<String> = u
                    .hidden
                    .iter()
                    .chain(u.head.iter())
                    .map(|(i, o)| format!("{i}x{o}"))
                    .collect();
                format!("{src}:{}", dims.join(","))
            })
            .collect();
        format!(
            "fcnn={} fourier={} units=[{}]",
            self.fcnn,
            self.fourier,
            layers.join(";")
        )
    }

    pub fn architecture_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.describe().as_bytes());
        format!("{:x}", h.finalize())
    }
}

fn stress_outputs() -> Vec<OutputId> {
    vec![
        OutputId::E,
        OutputId::P(0),
        OutputId::P(1),
        OutputId::P(2),
        OutputId::P(3),
    ]
}

fn chain(input: usize, width: usize, depth: usize) -> Vec<(usize, usize)> {
    let mut layers = vec![(input, width)];
    for _ in 1..depth {
        layers.push((width, width));
    }
    layers
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Source {
    Coords,
    Unit(usize),
}

#[derive(Clone, Debug)]
pub(crate) struct UnitPlan {
    pub source: Source,
    /// Swish-activated layers.
    pub hidden: Vec<(usize, usize)>,
    /// Trailing linear layer; trunks have none.
    pub head: Option<(usize, usize)>,
    pub outputs: Vec<OutputId>,
}

impl UnitPlan {
    fn trunk(source: Source, hidden: Vec<(usize, usize)>) -> UnitPlan {
        UnitPlan {
            source,
            hidden,
            head: None,
            outputs: vec![],
        }
    }

    fn headed(
        source: Source,
        hidden: Vec<(usize, usize)>,
        head_out: usize,
        outputs: Vec<OutputId>,
    ) -> UnitPlan {
        let head_in = hidden.last().expect("at least one hidden layer").1;
        UnitPlan {
            source,
            hidden,
            head: Some((head_in, head_out)),
            outputs,
        }
    }

    fn param_count(&self) -> usize {
        self.hidden
            .iter()
            .chain(self.head.iter())
            .map(|(i, o)| i * o + o)
            .sum()
    }
}

/// Flat weight/bias vector; layout follows the unit and layer order of the
/// spec, each layer as row-major W then b.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    pub values: Vec<f64>,
}

impl ParameterSet {
    /// Glorot-uniform weights (limit sqrt(6/(fan_in+fan_out))), zero biases,
    /// drawn in layout order from a generator seeded with `spec.seed`.
    pub fn init(spec: &NetworkSpec) -> Result<ParameterSet> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut values = Vec::with_capacity(spec.param_count());
        for unit in spec.units() {
            for (fan_in, fan_out) in unit.hidden.iter().chain(unit.head.iter()) {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for _ in 0..fan_in * fan_out {
                    values.push(rng.random_range(-limit..limit));
                }
                values.extend(std::iter::repeat_n(0.0, *fan_out));
            }
        }
        Ok(ParameterSet { values })
    }

    pub fn zeros(spec: &NetworkSpec) -> Result<ParameterSet> {
        spec.validate()?;
        Ok(ParameterSet {
            values: vec![0.0; spec.param_count()],
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Input mapping: raw coordinates, optionally extended with five sine modes
/// per axis.
pub fn fourier_features(x: f64, y: f64) -> [f64; 12] {
    let mut f = [0.0; 12];
    f[0] = x;
    f[1] = y;
    for k in 1..=5 {
        f[1 + k] = (k as f64 * PI * x).sin();
        f[6 + k] = (k as f64 * PI * y).sin();
    }
    f
}

/// z * sigmoid(z).
pub fn swish(z: f64) -> f64 {
    z / (1.0 + (-z).exp())
}

/// How many derivative channels an evaluation carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DerivOrder {
    /// value, d/dx, d/dy
    First,
    /// plus dxx, dxy, dyy
    Second,
}

impl DerivOrder {
    fn channels(self) -> usize {
        match self {
            DerivOrder::First => 3,
            DerivOrder::Second => 6,
        }
    }
}

const VAL: usize = 0;
const DX: usize = 1;
const DY: usize = 2;
const DXX: usize = 3;
const DXY: usize = 4;
const DYY: usize = 5;

/// Channel bundle moving through the layers; each entry is an (n_points x
/// width) graph node.
#[derive(Clone)]
struct Chans(Vec<TapeExpr>);

fn feature_channels(
    g: &Graph,
    points: &[[f64; 2]],
    fourier: bool,
    order: DerivOrder,
) -> Chans {
    let m = points.len();
    let dim = if fourier { 12 } else { 2 };
    let nch = order.channels();
    let mut arrays = vec![Array2::zeros((m, dim)); nch];
    for (r, &[x, y]) in points.iter().enumerate() {
        arrays[VAL][[r, 0]] = x;
        arrays[DX][[r, 0]] = 1.0;
        arrays[VAL][[r, 1]] = y;
        arrays[DY][[r, 1]] = 1.0;
        if fourier {
            for k in 1..=5 {
                let kp = k as f64 * PI;
                arrays[VAL][[r, 1 + k]] = (kp * x).sin();
                arrays[DX][[r, 1 + k]] = kp * (kp * x).cos();
                arrays[VAL][[r, 6 + k]] = (kp * y).sin();
                arrays[DY][[r, 6 + k]] = kp * (kp * y).cos();
                if nch > DXX {
                    arrays[DXX][[r, 1 + k]] = -kp * kp * (kp * x).sin();
                    arrays[DYY][[r, 6 + k]] = -kp * kp * (kp * y).sin();
                }
            }
        }
    }
    Chans(arrays.into_iter().map(|a| g.constant(a)).collect())
}

fn affine(g: &Graph, input: &Chans, w: &TapeExpr, b: &TapeExpr) -> Chans {
    let mut out: Vec<TapeExpr> = input.0.iter().map(|c| g.matmul(c, w)).collect();
    out[VAL] = out[VAL].clone() + b.clone();
    Chans(out)
}

/// Applies z*sigmoid(z) to the value channel and pushes the derivative
/// channels through by the chain rule.
fn swish_channels(g: &Graph, z: &Chans) -> Chans {
    let zv = &z.0[VAL];
    let s = g.sigmoid(zv);
    let one = g.scalar(1.0);
    let val = zv.clone() * s.clone();
    let sp = s.clone() * (one - s.clone());
    let ap = s.clone() + zv.clone() * sp.clone(); // d swish/dz
    let mut out = vec![
        val,
        z.0[DX].clone() * ap.clone(),
        z.0[DY].clone() * ap.clone(),
    ];
    if z.0.len() > DXX {
        let two = g.scalar(2.0);
        let spp = sp.clone() * (g.scalar(1.0) - two.clone() * s);
        let app = two * sp + zv.clone() * spp; // d2 swish/dz2
        out.push(z.0[DXX].clone() * ap.clone() + z.0[DX].clone() * z.0[DX].clone() * app.clone());
        out.push(z.0[DXY].clone() * ap.clone() + z.0[DX].clone() * z.0[DY].clone() * app.clone());
        out.push(z.0[DYY].clone() * ap + z.0[DY].clone() * z.0[DY].clone() * app);
    }
    Chans(out)
}

/// A built evaluation graph over a fixed point set. Reused across
/// iterations: write parameters, run forward (and backward), read results.
pub struct EvalSession {
    graph: Graph,
    order: DerivOrder,
    npoints: usize,
    outputs: Vec<(OutputId, Chans)>,
    coord_x: Chans,
    coord_y: Chans,
    param_count: usize,
}

impl EvalSession {
    pub fn new(spec: &NetworkSpec, points: &[[f64; 2]], order: DerivOrder) -> Result<EvalSession> {
        spec.validate()?;
        if points.is_empty() {
            return Err(Error::invalid("no evaluation points"));
        }
        let g = Graph::new();
        let features = feature_channels(&g, points, spec.fourier, order);

        let m = points.len();
        let nch = order.channels();
        let coord = |comp: usize| -> Chans {
            let mut arrays = vec![Array2::zeros((m, 1)); nch];
            for (r, p) in points.iter().enumerate() {
                arrays[VAL][[r, 0]] = p[comp];
                arrays[1 + comp][[r, 0]] = 1.0; // DX for x, DY for y
            }
            Chans(arrays.into_iter().map(|a| g.constant(a)).collect())
        };
        let coord_x = coord(0);
        let coord_y = coord(1);

        let mut unit_feed: Vec<Chans> = Vec::new();
        let mut outputs = Vec::new();
        for unit in spec.units() {
            let mut cur = match unit.source {
                Source::Coords => features.clone(),
                Source::Unit(i) => unit_feed[i].clone(),
            };
            // parameter creation order matches the ParameterSet layout
            for &(fi, fo) in &unit.hidden {
                let w = g.param((fi, fo));
                let b = g.param((1, fo));
                cur = swish_channels(&g, &affine(&g, &cur, &w, &b));
            }
            unit_feed.push(cur.clone());
            if let Some((fi, fo)) = unit.head {
                let w = g.param((fi, fo));
                let b = g.param((1, fo));
                let head = affine(&g, &cur, &w, &b);
                for (k, id) in unit.outputs.iter().enumerate() {
                    let col = Chans(
                        head.0
                            .iter()
                            .map(|c| g.slice_cols(c, k, k + 1))
                            .collect(),
                    );
                    outputs.push((*id, col));
                }
            }
        }

        let param_count = g.param_len();
        debug_assert_eq!(param_count, spec.param_count());
        Ok(EvalSession {
            graph: g,
            order,
            npoints: points.len(),
            outputs,
            coord_x,
            coord_y,
            param_count,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn order(&self) -> DerivOrder {
        self.order
    }

    pub fn npoints(&self) -> usize {
        self.npoints
    }

    pub fn output_ids(&self) -> Vec<OutputId> {
        self.outputs.iter().map(|(id, _)| *id).collect()
    }

    fn channels(&self, id: OutputId) -> Result<&Chans> {
        self.outputs
            .iter()
            .find(|(oid, _)| *oid == id)
            .map(|(_, c)| c)
            .ok_or_else(|| Error::invalid(format!("output {id:?} not present in this arrangement")))
    }

    /// Value and first spatial derivatives of an output, as graph nodes.
    pub fn jet1(&self, id: OutputId) -> Result<Jet1<TapeExpr>> {
        let c = self.channels(id)?;
        Ok(Jet1 {
            v: c.0[VAL].clone(),
            dx: c.0[DX].clone(),
            dy: c.0[DY].clone(),
        })
    }

    /// All channels of an output up to second order.
    pub fn jet2(&self, id: OutputId) -> Result<Jet2<TapeExpr>> {
        if self.order != DerivOrder::Second {
            return Err(Error::invalid(
                "second derivatives requested from a first-order session",
            ));
        }
        let c = self.channels(id)?;
        Ok(Jet2 {
            v: c.0[VAL].clone(),
            dx: c.0[DX].clone(),
            dy: c.0[DY].clone(),
            dxx: c.0[DXX].clone(),
            dxy: c.0[DXY].clone(),
            dyy: c.0[DYY].clone(),
        })
    }

    /// The x coordinate as a jet (dx = 1), for hard-BC transforms.
    pub fn x_jet1(&self) -> Jet1<TapeExpr> {
        Jet1 {
            v: self.coord_x.0[VAL].clone(),
            dx: self.coord_x.0[DX].clone(),
            dy: self.coord_x.0[DY].clone(),
        }
    }

    pub fn y_jet1(&self) -> Jet1<TapeExpr> {
        Jet1 {
            v: self.coord_y.0[VAL].clone(),
            dx: self.coord_y.0[DX].clone(),
            dy: self.coord_y.0[DY].clone(),
        }
    }

    pub fn x_jet2(&self) -> Result<Jet2<TapeExpr>> {
        self.coord_jet2(&self.coord_x)
    }

    pub fn y_jet2(&self) -> Result<Jet2<TapeExpr>> {
        self.coord_jet2(&self.coord_y)
    }

    fn coord_jet2(&self, c: &Chans) -> Result<Jet2<TapeExpr>> {
        if self.order != DerivOrder::Second {
            return Err(Error::invalid(
                "second derivatives requested from a first-order session",
            ));
        }
        Ok(Jet2 {
            v: c.0[VAL].clone(),
            dx: c.0[DX].clone(),
            dy: c.0[DY].clone(),
            dxx: c.0[DXX].clone(),
            dxy: c.0[DXY].clone(),
            dyy: c.0[DYY].clone(),
        })
    }

    /// Mean over evaluation points of an (n_points x 1) expression.
    pub fn mean(&self, e: &TapeExpr) -> TapeExpr {
        let g = &self.graph;
        g.sum_all(e) * g.scalar(1.0 / self.npoints as f64)
    }

    fn check_params(&self, params: &ParameterSet) -> Result<()> {
        if params.len() != self.param_count {
            return Err(Error::invalid(format!(
                "parameter vector has {} entries, architecture needs {}",
                params.len(),
                self.param_count
            )));
        }
        Ok(())
    }

    /// Forward evaluation only.
    pub fn eval(&self, params: &ParameterSet) -> Result<()> {
        self.check_params(params)?;
        self.graph.write_params(&params.values);
        self.graph.forward();
        Ok(())
    }

    /// Forward + reverse sweep on `loss`; returns (loss value, parameter
    /// gradient).
    pub fn run(&self, params: &ParameterSet, loss: &TapeExpr) -> Result<(f64, Vec<f64>)> {
        self.eval(params)?;
        let value = self.graph.scalar_value(loss);
        self.graph.backward(loss);
        let mut grad = vec![0.0; self.param_count];
        self.graph.read_param_grads(&mut grad);
        Ok((value, grad))
    }

    /// Per-point values of an (n_points x 1) expression after `eval`/`run`.
    pub fn values(&self, e: &TapeExpr) -> Vec<f64> {
        self.graph.value_of(e).column(0).to_vec()
    }

    pub fn scalar_value(&self, e: &TapeExpr) -> f64 {
        self.graph.scalar_value(e)
    }

    /// Clamp-guard activations seen by forward sweeps so far.
    pub fn clamp_events(&self) -> u64 {
        self.graph.clamp_events()
    }
}

/// Raw network outputs at a point (before any solution transform).
#[derive(Clone, Copy, Debug)]
pub struct RawOutputs {
    pub ux: f64,
    pub uy: f64,
    pub e: f64,
    /// Row-major (00, 01, 10, 11); `None` when the arrangement has no
    /// stress head.
    pub p: Option<[f64; 4]>,
}

/// Evaluates the raw outputs at one point.
pub fn forward(spec: &NetworkSpec, params: &ParameterSet, point: [f64; 2]) -> Result<RawOutputs> {
    let session = EvalSession::new(spec, &[point], DerivOrder::First)?;
    session.eval(params)?;
    let get = |id: OutputId| -> Result<f64> {
        Ok(session.values(&session.jet1(id)?.v)[0])
    };
    let p = if spec.has_stress_outputs() {
        Some([
            get(OutputId::P(0))?,
            get(OutputId::P(1))?,
            get(OutputId::P(2))?,
            get(OutputId::P(3))?,
        ])
    } else {
        None
    };
    Ok(RawOutputs {
        ux: get(OutputId::Ux)?,
        uy: get(OutputId::Uy)?,
        e: get(OutputId::E)?,
        p,
    })
}

/// Value and exact spatial derivatives of one output at one point.
#[derive(Clone, Copy, Debug, Default)]
pub struct OutputDerivatives {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

/// Exact spatial derivatives of every output at a point.
pub fn spatial_derivatives(
    spec: &NetworkSpec,
    params: &ParameterSet,
    point: [f64; 2],
) -> Result<Vec<(OutputId, OutputDerivatives)>> {
    let session = EvalSession::new(spec, &[point], DerivOrder::Second)?;
    session.eval(params)?;
    let mut out = Vec::new();
    for id in session.output_ids() {
        let jet = session.jet2(id)?;
        let v = |e: &TapeExpr| session.values(e)[0];
        out.push((
            id,
            OutputDerivatives {
                value: v(&jet.v),
                dx: v(&jet.dx),
                dy: v(&jet.dy),
                dxx: v(&jet.dxx),
                dxy: v(&jet.dxy),
                dyy: v(&jet.dyy),
            },
        ));
    }
    Ok(out)
}

/// Builds a scalar loss over `points` with the supplied closure and returns
/// its value and exact parameter gradient. The session carries second-order
/// spatial channels, so losses may differentiate first and second spatial
/// derivatives of any output.
pub fn loss_gradient<F>(
    spec: &NetworkSpec,
    params: &ParameterSet,
    points: &[[f64; 2]],
    build: F,
) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&EvalSession) -> Result<TapeExpr>,
{
    let session = EvalSession::new(spec, points, DerivOrder::Second)?;
    let loss = build(&session)?;
    session.run(params, &loss)
}

const CHECKPOINT_MAGIC: &str = "elastmap checkpoint 1";

/// Writes parameters with a short text header followed by raw
/// little-endian f64 bytes.
pub fn save_checkpoint(
    path: &Path,
    spec: &NetworkSpec,
    params: &ParameterSet,
    iteration: u64,
) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(Error::invalid(
            "parameter vector length does not match the architecture",
        ));
    }
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{CHECKPOINT_MAGIC}")?;
    writeln!(w, "arch {}", spec.architecture_hash())?;
    writeln!(w, "seed {}", spec.seed)?;
    writeln!(w, "iteration {iteration}")?;
    writeln!(w, "count {}", params.len())?;
    writeln!(w)?;
    for v in &params.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a checkpoint back, verifying the architecture hash and length.
pub fn load_checkpoint(path: &Path, spec: &NetworkSpec) -> Result<(ParameterSet, u64)> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut line = String::new();

    let read_line = |r: &mut BufReader<std::fs::File>, line: &mut String| -> Result<String> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Err(Error::format("checkpoint truncated"));
        }
        Ok(line.trim_end_matches('\n').to_string())
    };

    if read_line(&mut r, &mut line)? != CHECKPOINT_MAGIC {
        return Err(Error::format("not a checkpoint file"));
    }
    let mut arch = None;
    let mut iteration = None;
    let mut count = None;
    loop {
        let l = read_line(&mut r, &mut line)?;
        if l.is_empty() {
            break;
        }
        let (key, value) = l
            .split_once(' ')
            .ok_or_else(|| Error::format("malformed checkpoint header line"))?;
        match key {
            "arch" => arch = Some(value.to_string()),
            "iteration" => {
                iteration = Some(
                    value
                        .parse::<u64>()
                        .map_err(|_| Error::format("bad iteration in checkpoint"))?,
                )
            }
            "count" => {
                count = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| Error::format("bad count in checkpoint"))?,
                )
            }
            "seed" => {}
            _ => return Err(Error::format(format!("unknown checkpoint field {key:?}"))),
        }
    }
    let arch = arch.ok_or_else(|| Error::format("checkpoint missing arch"))?;
    if arch != spec.architecture_hash() {
        return Err(Error::invalid(
            "checkpoint was written for a different architecture",
        ));
    }
    let count = count.ok_or_else(|| Error::format("checkpoint missing count"))?;
    if count != spec.param_count() {
        return Err(Error::invalid(
            "checkpoint parameter count does not match the architecture",
        ));
    }
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::format("checkpoint parameter block truncated"))?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((
        ParameterSet { values },
        iteration.ok_or_else(|| Error::format("checkpoint missing iteration"))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_specs(width: usize, depth: usize) -> Vec<NetworkSpec> {
        let mut specs = Vec::new();
        for fcnn in [Fcnn::I, Fcnn::II, Fcnn::III, Fcnn::IV, Fcnn::V] {
            for fourier in [false, true] {
                specs.push(
                    NetworkSpec::new(fcnn, fourier, 7)
                        .with_width(width)
                        .with_depth(depth),
                );
            }
        }
        specs
    }

    #[test]
    fn fourier_features_match_hand_values() {
        let f0 = fourier_features(0.0, 0.0);
        assert_eq!(f0, [0.0; 12]);

        let f = fourier_features(0.5, 0.5);
        assert_eq!(f[0], 0.5);
        assert_eq!(f[1], 0.5);
        // sin(k*pi/2) for k = 1..5
        let expect = [1.0, 0.0, -1.0, 0.0, 1.0];
        for k in 0..5 {
            assert!((f[2 + k] - expect[k]).abs() < 1e-12, "x mode {k}");
            assert!((f[7 + k] - expect[k]).abs() < 1e-12, "y mode {k}");
        }
    }

    #[test]
    fn swish_reference_values() {
        assert_eq!(swish(0.0), 0.0);
        assert!((swish(1.0) - 0.731_059).abs() < 1e-6);
        // swish(x) - x = -x e^{-x} / (1 + e^{-x}); about 4e-8 at x = 20.
        assert!((swish(20.0) - 20.0).abs() < 1e-7);
        assert!((swish(-1.0) + 0.268_941).abs() < 1e-6);
    }

    #[test]
    fn published_plans_have_expected_parameter_counts() {
        let v_plain = NetworkSpec::new(Fcnn::V, false, 0);
        assert_eq!(v_plain.param_count(), 23_253);
        let v_fourier = NetworkSpec::new(Fcnn::V, true, 0);
        assert_eq!(v_fourier.param_count(), 24_003);
        let iv_plain = NetworkSpec::new(Fcnn::IV, false, 0);
        assert_eq!(iv_plain.param_count(), 8_103);

        for spec in all_specs(4, 2) {
            let params = ParameterSet::init(&spec).unwrap();
            assert_eq!(params.len(), spec.param_count(), "{}", spec.describe());
        }
    }

    #[test]
    fn output_ids_follow_the_arrangement() {
        for (fcnn, n) in [
            (Fcnn::I, 7),
            (Fcnn::II, 7),
            (Fcnn::III, 3),
            (Fcnn::IV, 3),
            (Fcnn::V, 3),
        ] {
            let spec = NetworkSpec::new(fcnn, false, 0);
            let ids = spec.output_ids();
            assert_eq!(ids.len(), n, "{fcnn}");
            assert!(ids.contains(&OutputId::Ux));
            assert!(ids.contains(&OutputId::Uy));
            assert!(ids.contains(&OutputId::E));
            assert_eq!(
                ids.contains(&OutputId::P(3)),
                spec.has_stress_outputs(),
                "{fcnn}"
            );
        }
    }

    #[test]
    fn zero_parameters_give_zero_outputs() {
        for spec in all_specs(3, 2) {
            let params = ParameterSet::zeros(&spec).unwrap();
            let out = forward(&spec, &params, [0.3, 0.7]).unwrap();
            assert_eq!(out.ux, 0.0, "{}", spec.describe());
            assert_eq!(out.uy, 0.0);
            assert_eq!(out.e, 0.0);
            if let Some(p) = out.p {
                assert_eq!(p, [0.0; 4]);
            }
        }
    }

    #[test]
    fn single_neuron_matches_hand_computation() {
        // V with width 1, depth 1: one swish neuron feeding a 3-wide head.
        let spec = NetworkSpec::new(Fcnn::V, false, 0).with_width(1).with_depth(1);
        assert_eq!(spec.param_count(), 2 + 1 + 3 + 3);
        let (w1x, w1y, b1) = (0.8, -0.5, 0.3);
        let w2 = [1.2, -0.7, 0.4];
        let b2 = [0.05, -0.1, 0.2];
        let params = ParameterSet {
            values: vec![
                w1x, w1y, b1, w2[0], w2[1], w2[2], b2[0], b2[1], b2[2],
            ],
        };
        let (x, y) = (0.25, 0.6);
        let h = swish(w1x * x + w1y * y + b1);
        let out = forward(&spec, &params, [x, y]).unwrap();
        assert!((out.ux - (w2[0] * h + b2[0])).abs() < 1e-14);
        assert!((out.uy - (w2[1] * h + b2[1])).abs() < 1e-14);
        assert!((out.e - (w2[2] * h + b2[2])).abs() < 1e-14);
    }

    #[test]
    fn separate_networks_are_parameter_independent() {
        // Arrangement IV: perturbing one subnetwork's parameters must leave
        // the other outputs bit-identical.
        let spec = NetworkSpec::new(Fcnn::IV, true, 11).with_width(5).with_depth(2);
        let base = ParameterSet::init(&spec).unwrap();
        let ranges = spec.unit_param_ranges();
        assert_eq!(ranges.len(), 3);
        let point = [0.4, 0.9];
        let before = forward(&spec, &base, point).unwrap();
        let ids = [OutputId::Ux, OutputId::Uy, OutputId::E];
        for (k, range) in ranges.iter().enumerate() {
            let mut bumped = base.clone();
            for v in &mut bumped.values[range.clone()] {
                *v += 0.37;
            }
            let after = forward(&spec, &bumped, point).unwrap();
            let pick = |o: &RawOutputs, id: OutputId| match id {
                OutputId::Ux => o.ux,
                OutputId::Uy => o.uy,
                OutputId::E => o.e,
                OutputId::P(_) => unreachable!(),
            };
            for (j, id) in ids.iter().enumerate() {
                if j == k {
                    assert_ne!(pick(&before, *id), pick(&after, *id));
                } else {
                    assert_eq!(pick(&before, *id), pick(&after, *id), "unit {k} output {j}");
                }
            }
        }
    }

    #[test]
    fn two_network_arrangement_has_exact_zero_cross_gradients() {
        // Arrangement II: d(mean ux)/d(theta of the stress net) is exactly
        // the zero vector, and vice versa.
        let spec = NetworkSpec::new(Fcnn::II, false, 3).with_width(4).with_depth(2);
        let params = ParameterSet::init(&spec).unwrap();
        let points = [[0.2, 0.3], [0.8, 0.5], [0.4, 0.9]];
        let ranges = spec.unit_param_ranges();
        assert_eq!(ranges.len(), 2);

        let (_, g_ux) = loss_gradient(&spec, &params, &points, |s| {
            let u = s.jet1(OutputId::Ux)?;
            Ok(s.mean(&(u.v.clone() * u.v)))
        })
        .unwrap();
        assert!(g_ux[ranges[0].clone()].iter().any(|&g| g != 0.0));
        assert!(g_ux[ranges[1].clone()].iter().all(|&g| g == 0.0));

        let (_, g_p) = loss_gradient(&spec, &params, &points, |s| {
            let p = s.jet2(OutputId::P(2))?;
            Ok(s.mean(&(p.dxx.clone() * p.dxx)))
        })
        .unwrap();
        assert!(g_p[ranges[0].clone()].iter().all(|&g| g == 0.0));
        assert!(g_p[ranges[1].clone()].iter().any(|&g| g != 0.0));
    }

    #[test]
    fn identity_map_network_has_unit_gradient() {
        // swish(x) - swish(-x) = x exactly, so this two-neuron net returns
        // ux(x, y) = x with zero curvature.
        let spec = NetworkSpec::new(Fcnn::V, false, 0).with_width(2).with_depth(1);
        let params = ParameterSet {
            values: vec![
                // W1 (2x2, row-major: input rows x, y)
                1.0, -1.0, 0.0, 0.0, // b1
                0.0, 0.0, // W2 (2x3): h0 -> ux with +1, h1 -> ux with -1
                1.0, 0.0, 0.0, -1.0, 0.0, 0.0, // b2
                0.0, 0.0, 0.0,
            ],
        };
        for &(x, y) in &[(0.17, 0.52), (0.9, 0.1), (0.5, 0.5)] {
            let derivs = spatial_derivatives(&spec, &params, [x, y]).unwrap();
            let (_, d) = derivs
                .iter()
                .find(|(id, _)| *id == OutputId::Ux)
                .unwrap();
            assert!((d.value - x).abs() < 1e-12);
            assert!((d.dx - 1.0).abs() < 1e-12);
            assert!(d.dy.abs() < 1e-12);
            assert!(d.dxx.abs() < 1e-12);
            assert!(d.dxy.abs() < 1e-12);
            assert!(d.dyy.abs() < 1e-12);
        }
    }

    #[test]
    fn sine_feature_passthrough_scales_derivative_by_its_frequency() {
        // Wire ux = sin(3*pi*x) through the identity trick on the third
        // sine mode; d/dx at x=0 must be exactly 3*pi.
        let spec = NetworkSpec::new(Fcnn::V, true, 0).with_width(2).with_depth(1);
        let mut values = vec![0.0; spec.param_count()];
        // W1 is 12x2 row-major; feature 4 is sin(3*pi*x).
        values[4 * 2] = 1.0;
        values[4 * 2 + 1] = -1.0;
        // W2 follows W1 (24) + b1 (2).
        let w2 = 26;
        values[w2] = 1.0; // h0 -> ux
        values[w2 + 3] = -1.0; // h1 -> ux
        let params = ParameterSet { values };

        let derivs = spatial_derivatives(&spec, &params, [0.0, 0.3]).unwrap();
        let (_, d) = derivs.iter().find(|(id, _)| *id == OutputId::Ux).unwrap();
        let k = 3.0 * PI;
        assert!(d.value.abs() < 1e-12);
        assert!((d.dx - k).abs() < 1e-9, "dx = {}", d.dx);
        assert!(d.dy.abs() < 1e-12);
        assert!(d.dxx.abs() < 1e-8);

        let derivs = spatial_derivatives(&spec, &params, [0.25, 0.3]).unwrap();
        let (_, d) = derivs.iter().find(|(id, _)| *id == OutputId::Ux).unwrap();
        assert!((d.value - (k * 0.25).sin()).abs() < 1e-12);
        assert!((d.dxx + k * k * (k * 0.25).sin()).abs() < 1e-7);
    }

    #[test]
    fn spatial_derivatives_match_finite_differences_everywhere() {
        let h = 1e-5;
        let points = [[0.31, 0.62], [0.77, 0.18]];
        for spec in all_specs(4, 2) {
            let params = ParameterSet::init(&spec).unwrap();
            for &p in &points {
                let at = |x: f64, y: f64| spatial_derivatives(&spec, &params, [x, y]).unwrap();
                let here = at(p[0], p[1]);
                let xp = at(p[0] + h, p[1]);
                let xm = at(p[0] - h, p[1]);
                let yp = at(p[0], p[1] + h);
                let ym = at(p[0], p[1] - h);
                for i in 0..here.len() {
                    let (id, d) = here[i];
                    let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(1.0);
                    let fd_dx = (xp[i].1.value - xm[i].1.value) / (2.0 * h);
                    let fd_dy = (yp[i].1.value - ym[i].1.value) / (2.0 * h);
                    // second derivatives as FD of the exact first derivatives
                    let fd_dxx = (xp[i].1.dx - xm[i].1.dx) / (2.0 * h);
                    let fd_dxy = (yp[i].1.dx - ym[i].1.dx) / (2.0 * h);
                    let fd_dyy = (yp[i].1.dy - ym[i].1.dy) / (2.0 * h);
                    let tag = format!("{} {id:?}", spec.describe());
                    assert!(rel(d.dx, fd_dx) < 1e-5, "{tag} dx {} vs {fd_dx}", d.dx);
                    assert!(rel(d.dy, fd_dy) < 1e-5, "{tag} dy {} vs {fd_dy}", d.dy);
                    assert!(rel(d.dxx, fd_dxx) < 1e-5, "{tag} dxx {} vs {fd_dxx}", d.dxx);
                    assert!(rel(d.dxy, fd_dxy) < 1e-5, "{tag} dxy {} vs {fd_dxy}", d.dxy);
                    assert!(rel(d.dyy, fd_dyy) < 1e-5, "{tag} dyy {} vs {fd_dyy}", d.dyy);
                }
            }
        }
    }

    #[test]
    fn loss_gradient_of_zero_network_is_zero() {
        let spec = NetworkSpec::new(Fcnn::V, false, 0).with_width(3).with_depth(2);
        let params = ParameterSet::zeros(&spec).unwrap();
        let (value, grad) = loss_gradient(&spec, &params, &[[0.5, 0.5]], |s| {
            let u = s.jet1(OutputId::Ux)?;
            Ok(s.mean(&(u.v.clone() * u.v)))
        })
        .unwrap();
        assert_eq!(value, 0.0);
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn one_neuron_loss_gradient_matches_symbolic_derivatives() {
        let spec = NetworkSpec::new(Fcnn::V, false, 0).with_width(1).with_depth(1);
        let (w1x, w1y, b1, w2, b2) = (0.6, -0.4, 0.2, 1.3, -0.25);
        let params = ParameterSet {
            values: vec![w1x, w1y, b1, w2, 0.0, 0.0, b2, 0.0, 0.0],
        };
        let (x, y) = (0.45, 0.8);
        let (value, grad) = loss_gradient(&spec, &params, &[[x, y]], |s| {
            let u = s.jet1(OutputId::Ux)?;
            Ok(s.mean(&(u.v.clone() * u.v)))
        })
        .unwrap();

        let z = w1x * x + w1y * y + b1;
        let sig = 1.0 / (1.0 + (-z).exp());
        let hval = z * sig;
        let hp = sig + z * sig * (1.0 - sig);
        let ux = w2 * hval + b2;
        assert!((value - ux * ux).abs() < 1e-14);

        let d_ux = 2.0 * ux;
        let expect = [
            d_ux * w2 * hp * x, // w1x
            d_ux * w2 * hp * y, // w1y
            d_ux * w2 * hp,     // b1
            d_ux * hval,        // w2 column for ux
            0.0,
            0.0,
            d_ux, // b2 for ux
            0.0,
            0.0,
        ];
        for (g, e) in grad.iter().zip(expect) {
            assert!((g - e).abs() < 1e-12, "{g} vs {e}");
        }
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        // Exhaustive central-difference check on a loss that touches values,
        // first, and second spatial derivatives.
        for spec in [
            NetworkSpec::new(Fcnn::V, true, 5).with_width(3).with_depth(2),
            NetworkSpec::new(Fcnn::II, false, 9).with_width(3).with_depth(2),
            NetworkSpec::new(Fcnn::I, false, 13).with_width(2).with_depth(1),
        ] {
            let params = ParameterSet::init(&spec).unwrap();
            let points = [[0.3, 0.4], [0.7, 0.6]];
            let build = |s: &EvalSession| -> Result<TapeExpr> {
                let ux = s.jet2(OutputId::Ux)?;
                let e = s.jet1(OutputId::E)?;
                let term = ux.v.clone() * ux.v.clone()
                    + ux.dx.clone() * ux.dx
                    + ux.dxx.clone() * ux.dxx
                    + ux.dxy.clone() * e.v;
                Ok(s.mean(&term))
            };
            let (_, grad) = loss_gradient(&spec, &params, &points, build).unwrap();

            let h = 1e-6;
            let eval = |values: &[f64]| -> f64 {
                let p = ParameterSet {
                    values: values.to_vec(),
                };
                loss_gradient(&spec, &p, &points, build).unwrap().0
            };
            for i in 0..params.len() {
                let mut plus = params.values.clone();
                plus[i] += h;
                let mut minus = params.values.clone();
                minus[i] -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let denom = fd.abs().max(grad[i].abs()).max(1e-6);
                assert!(
                    (grad[i] - fd).abs() / denom < 1e-5,
                    "{} param {i}: {} vs {fd}",
                    spec.describe(),
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let spec = NetworkSpec::new(Fcnn::III, true, 21).with_width(6).with_depth(2);
        let a = ParameterSet::init(&spec).unwrap();
        let b = ParameterSet::init(&spec).unwrap();
        assert_eq!(a, b);

        let p = [0.37, 0.81];
        let d1 = spatial_derivatives(&spec, &a, p).unwrap();
        let d2 = spatial_derivatives(&spec, &a, p).unwrap();
        for (x, y) in d1.iter().zip(d2.iter()) {
            assert_eq!(x.1.value, y.1.value);
            assert_eq!(x.1.dxx, y.1.dxx);
        }
    }

    #[test]
    fn first_order_session_rejects_second_derivative_requests() {
        let spec = NetworkSpec::new(Fcnn::V, false, 0).with_width(2).with_depth(1);
        let session = EvalSession::new(&spec, &[[0.5, 0.5]], DerivOrder::First).unwrap();
        assert!(session.jet2(OutputId::Ux).is_err());
        assert!(session.jet1(OutputId::Ux).is_ok());
        assert!(session.jet1(OutputId::P(0)).is_err());
    }

    #[test]
    fn checkpoint_roundtrip_preserves_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let spec = NetworkSpec::new(Fcnn::II, true, 99).with_width(4).with_depth(2);
        let params = ParameterSet::init(&spec).unwrap();
        save_checkpoint(&path, &spec, &params, 1234).unwrap();

        let (loaded, iteration) = load_checkpoint(&path, &spec).unwrap();
        assert_eq!(iteration, 1234);
        assert_eq!(loaded.values, params.values);

        // a different architecture must be refused
        let other = NetworkSpec::new(Fcnn::II, false, 99).with_width(4).with_depth(2);
        assert!(load_checkpoint(&path, &other).is_err());

        // truncated parameter block must be refused
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.ckpt");
        std::fs::write(&cut, &bytes[..bytes.len() - 8]).unwrap();
        assert!(load_checkpoint(&cut, &spec).is_err());
    }

    #[test]
    fn parameter_length_mismatch_is_rejected() {
        let spec = NetworkSpec::new(Fcnn::V, false, 0).with_width(2).with_depth(1);
        let params = ParameterSet { values: vec![0.0; 3] };
        assert!(forward(&spec, &params, [0.5, 0.5]).is_err());
    }

    #[test]
    fn arrangement_names_parse() {
        assert_eq!("III".parse::<Fcnn>().unwrap(), Fcnn::III);
        assert_eq!("v".parse::<Fcnn>().unwrap(), Fcnn::V);
        assert_eq!("2".parse::<Fcnn>().unwrap(), Fcnn::II);
        assert!("VI".parse::<Fcnn>().is_err());
    }
}
