//! File formats: JSON models, cost tables and grid configs, a line-based
//! policy format, and CSV run files with a JSON metadata sidecar.
//!
//! Floats in JSON and policy files are written with 17 significant digits so
//! that reading a file back reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::costs::{BeliefCost, InitialStateCost, StateControlCost};
use crate::error::{Error, Result};
use crate::gridworld::{GridConfig, GridSpec};
use crate::model::TabularModel;
use crate::sim::{Arm, RunRow, TrajectoryRecord};
use crate::solver::{AlphaPolicy, AlphaVector, SolveParams};

/// Pretty-prints containers shallower than `inline_depth` and writes deeper
/// ones on a single line.
struct DecimalFormatter {
    depth: usize,
    inline_depth: usize,
    has_value: bool,
}

impl DecimalFormatter {
    fn new(inline_depth: usize) -> Self {
        Self {
            depth: 0,
            inline_depth,
            has_value: false,
        }
    }

    fn pretty(&self) -> bool {
        self.depth < self.inline_depth
    }

    fn indent<W: ?Sized + Write>(&self, w: &mut W, depth: usize) -> io::Result<()> {
        w.write_all(b"\n")?;
        for _ in 0..depth {
            w.write_all(b"  ")?;
        }
        Ok(())
    }

    fn open<W: ?Sized + Write>(&mut self, w: &mut W, c: &[u8]) -> io::Result<()> {
        self.depth += 1;
        self.has_value = false;
        w.write_all(c)
    }

    fn close<W: ?Sized + Write>(&mut self, w: &mut W, c: &[u8]) -> io::Result<()> {
        let pretty = self.pretty();
        self.depth -= 1;
        if self.has_value && pretty {
            self.indent(w, self.depth)?;
        }
        w.write_all(c)
    }

    fn item<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if !first {
            w.write_all(b",")?;
        }
        if self.pretty() {
            self.indent(w, self.depth)?;
        }
        Ok(())
    }
}

impl serde_json::ser::Formatter for DecimalFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        write!(w, "{value:.8e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.open(w, b"[")
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.close(w, b"]")
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.item(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.open(w, b"{")
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.close(w, b"}")
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.item(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(if self.pretty() { b": " } else { b":" })
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, _w: &mut W) -> io::Result<()> {
        self.has_value = true;
        Ok(())
    }
}

fn to_json_with<T: Serialize>(value: &T, inline_depth: usize) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, DecimalFormatter::new(inline_depth));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// JSON with round-trip exact floats; arrays nested three or more levels deep
/// stay on one line.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    to_json_with(value, 3)
}

/// Single-line JSON with round-trip exact floats.
pub fn to_json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = to_json_with(value, 0)?;
    s.pop();
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex_digest(&bytes))
}

pub fn hex_digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// `path` with `suffix` appended to its file name (`runs.csv` -> `runs.csv.meta.json`).
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

// ---------------------------------------------------------------------------
// models

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_states: usize,
    pub n_controls: usize,
    pub n_obs: usize,
    pub discount: f64,
    pub initial_belief: Vec<f64>,
    /// `[u][from][to]`
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `[u][x][y]`
    pub observation: Vec<Vec<Vec<f64>>>,
}

impl ModelFile {
    pub fn from_model(model: &TabularModel<f64>) -> Self {
        let (n, nu, ny) = (model.n_states(), model.n_controls(), model.n_obs());
        Self {
            n_states: n,
            n_controls: nu,
            n_obs: ny,
            discount: model.discount(),
            initial_belief: model.initial_belief().to_vec(),
            transition: (0..nu)
                .map(|u| (0..n).map(|x| model.transition_row(u, x).to_vec()).collect())
                .collect(),
            observation: (0..nu)
                .map(|u| (0..n).map(|x| model.observation_row(u, x).to_vec()).collect())
                .collect(),
        }
    }

    /// Validates shapes against the declared sizes, then the model itself.
    pub fn into_model(self) -> Result<TabularModel<f64>> {
        let flat_t = flatten(
            &self.transition,
            self.n_controls,
            self.n_states,
            self.n_states,
            "transition",
        )?;
        let flat_o = flatten(
            &self.observation,
            self.n_controls,
            self.n_states,
            self.n_obs,
            "observation",
        )?;
        TabularModel::new(
            self.n_states,
            self.n_controls,
            self.n_obs,
            flat_t,
            flat_o,
            self.initial_belief,
            self.discount,
        )
    }
}

fn flatten(table: &[Vec<Vec<f64>>], a: usize, b: usize, c: usize, what: &str) -> Result<Vec<f64>> {
    let ok = table.len() == a && table.iter().all(|m| m.len() == b && m.iter().all(|r| r.len() == c));
    if !ok {
        return Err(Error::DimensionMismatch(format!("{what} table is not {a}x{b}x{c}")));
    }
    Ok(table.iter().flatten().flatten().copied().collect())
}

pub fn save_model(path: &Path, model: &TabularModel<f64>) -> Result<()> {
    write_json(path, &ModelFile::from_model(model))
}

pub fn load_model(path: &Path) -> Result<TabularModel<f64>> {
    read_json::<ModelFile>(path)?.into_model()
}

// ---------------------------------------------------------------------------
// costs

/// Serialized belief cost. Only `none` and `initial_entropy` are storable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiSpec {
    pub tag: PsiTag,
    #[serde(default)]
    pub weight: f64,
}

/// Tag of a storable belief cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiTag {
    None,
    InitialEntropy,
}

impl PsiSpec {
    pub fn none() -> Self {
        Self {
            tag: PsiTag::None,
            weight: 0.0,
        }
    }

    pub fn entropy(weight: f64) -> Self {
        Self {
            tag: PsiTag::InitialEntropy,
            weight,
        }
    }

    /// Parses `none` or `entropy:<weight>`.
    pub fn parse(s: &str) -> Result<Self> {
        if s == "none" {
            return Ok(Self::none());
        }
        let weight = s
            .strip_prefix("entropy:")
            .and_then(|w| w.parse::<f64>().ok())
            .filter(|w| w.is_finite() && *w >= 0.0)
            .ok_or_else(|| Error::Parse(format!("belief cost {s:?}: expected none or entropy:<weight>")))?;
        Ok(Self::entropy(weight))
    }

    pub fn to_belief_cost(self) -> BeliefCost<f64> {
        match self.tag {
            PsiTag::None => BeliefCost::None,
            PsiTag::InitialEntropy => BeliefCost::InitialEntropy { weight: self.weight },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFile {
    InitialState {
        index_order: String,
        n_states: usize,
        n_controls: usize,
        /// `[x0][x][u]`
        table: Vec<Vec<Vec<f64>>>,
        psi: PsiSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal_map: Option<Vec<usize>>,
    },
    StateControl {
        index_order: String,
        n_states: usize,
        n_controls: usize,
        /// `[x][u]`
        table: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        goal_map: Option<Vec<usize>>,
    },
}

const ISC_ORDER: &str = "x0,x,u";
const KAPPA_ORDER: &str = "x,u";

impl CostFile {
    pub fn initial_state(c: &InitialStateCost<f64>, psi: PsiSpec, goal_map: Option<Vec<usize>>) -> Self {
        let (n, nu) = (c.n_base(), c.n_controls());
        CostFile::InitialState {
            index_order: ISC_ORDER.into(),
            n_states: n,
            n_controls: nu,
            table: (0..n)
                .map(|x0| (0..n).map(|x| (0..nu).map(|u| c.get(x0, x, u)).collect()).collect())
                .collect(),
            psi,
            goal_map,
        }
    }

    pub fn state_control(kappa: &StateControlCost<f64>, goal_map: Option<Vec<usize>>) -> Self {
        let (n, nu) = (kappa.n_states(), kappa.n_controls());
        CostFile::StateControl {
            index_order: KAPPA_ORDER.into(),
            n_states: n,
            n_controls: nu,
            table: (0..n).map(|x| (0..nu).map(|u| kappa.get(x, u)).collect()).collect(),
            goal_map,
        }
    }

    pub fn goal_map(&self) -> Option<&[usize]> {
        match self {
            CostFile::InitialState { goal_map, .. } | CostFile::StateControl { goal_map, .. } => goal_map.as_deref(),
        }
    }

    pub fn into_initial_state(self) -> Result<(InitialStateCost<f64>, PsiSpec)> {
        match self {
            CostFile::InitialState {
                index_order,
                n_states,
                n_controls,
                table,
                psi,
                ..
            } => {
                check_order(&index_order, ISC_ORDER)?;
                let flat = flatten(&table, n_states, n_states, n_controls, "initial-state cost")?;
                Ok((InitialStateCost::new(n_states, n_controls, flat)?, psi))
            }
            CostFile::StateControl { .. } => Err(Error::Parse(
                "expected an initial_state cost file, found state_control".into(),
            )),
        }
    }

    pub fn into_state_control(self) -> Result<StateControlCost<f64>> {
        match self {
            CostFile::StateControl {
                index_order,
                n_states,
                n_controls,
                table,
                ..
            } => {
                check_order(&index_order, KAPPA_ORDER)?;
                let ok = table.len() == n_states && table.iter().all(|r| r.len() == n_controls);
                if !ok {
                    return Err(Error::DimensionMismatch(format!(
                        "state-control cost table is not {n_states}x{n_controls}"
                    )));
                }
                StateControlCost::new(n_states, n_controls, table.concat())
            }
            CostFile::InitialState { .. } => Err(Error::Parse(
                "expected a state_control cost file, found initial_state".into(),
            )),
        }
    }
}

fn check_order(found: &str, want: &str) -> Result<()> {
    if found != want {
        return Err(Error::Parse(format!("index_order {found:?}, expected {want:?}")));
    }
    Ok(())
}

pub fn load_costs(path: &Path) -> Result<CostFile> {
    read_json(path)
}

// ---------------------------------------------------------------------------
// grid configs

pub fn load_grid(path: &Path) -> Result<GridSpec> {
    GridSpec::from_config(&read_json::<GridConfig>(path)?)
}

pub fn save_grid(path: &Path, spec: &GridSpec) -> Result<()> {
    write_json(path, &spec.to_config())
}

// ---------------------------------------------------------------------------
// policies

const POLICY_MAGIC: &str = "isc-pomdp-policy 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeliefSpace {
    Augmented,
    Base,
}

impl BeliefSpace {
    pub fn as_str(self) -> &'static str {
        match self {
            BeliefSpace::Augmented => "augmented",
            BeliefSpace::Base => "base",
        }
    }

    pub fn arm(self) -> Arm {
        match self {
            BeliefSpace::Augmented => Arm::Augmented,
            BeliefSpace::Base => Arm::Base,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub belief_space: BeliefSpace,
    pub n_controls: usize,
    pub discount: f64,
    pub params: SolveParams,
    pub psi: PsiSpec,
    pub policy: AlphaPolicy<f64>,
}

impl PolicyFile {
    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        let alphas = self.policy.alphas();
        let _ = writeln!(out, "{POLICY_MAGIC}");
        let _ = writeln!(out, "belief_space {}", self.belief_space.as_str());
        let _ = writeln!(out, "n_states {}", self.policy.n_states());
        let _ = writeln!(out, "n_controls {}", self.n_controls);
        let _ = writeln!(out, "discount {:.16e}", self.discount);
        let _ = writeln!(out, "psi {}", to_json_line(&self.psi)?);
        let _ = writeln!(out, "params {}", to_json_line(&self.params)?);
        let _ = writeln!(out, "alphas {}", alphas.len());
        for a in alphas {
            let _ = write!(out, "{}", a.action);
            for v in &a.values {
                let _ = write!(out, " {v:.16e}");
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut next = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("policy file ends before {key:?}")))?;
            if key.is_empty() {
                return Ok(line.to_string());
            }
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("expected {key:?}, found {line:?}")))
        };
        if next("")? != POLICY_MAGIC {
            return Err(Error::Parse("not a policy file".into()));
        }
        let belief_space = match next("belief_space")?.as_str() {
            "augmented" => BeliefSpace::Augmented,
            "base" => BeliefSpace::Base,
            other => return Err(Error::Parse(format!("unknown belief space {other:?}"))),
        };
        let n_states: usize = parse_num(&next("n_states")?)?;
        let n_controls: usize = parse_num(&next("n_controls")?)?;
        let discount: f64 = parse_num(&next("discount")?)?;
        let psi: PsiSpec = serde_json::from_str(&next("psi")?)?;
        let params: SolveParams = serde_json::from_str(&next("params")?)?;
        let count: usize = parse_num(&next("alphas")?)?;
        let mut alphas = Vec::with_capacity(count);
        for i in 0..count {
            let line = next("")?;
            let mut fields = line.split_ascii_whitespace();
            let action: usize = parse_num(fields.next().unwrap_or(""))?;
            if action >= n_controls {
                return Err(Error::Parse(format!("alpha {i}: action {action} out of range")));
            }
            let values = fields.map(parse_num::<f64>).collect::<Result<Vec<_>>>()?;
            if values.len() != n_states {
                return Err(Error::DimensionMismatch(format!(
                    "alpha {i} has {} values, expected {n_states}",
                    values.len()
                )));
            }
            alphas.push(AlphaVector { values, action });
        }
        Ok(Self {
            belief_space,
            n_controls,
            discount,
            params,
            psi,
            policy: AlphaPolicy::new(alphas)?,
        })
    }
}

fn parse_num<N: std::str::FromStr>(s: &str) -> Result<N> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number {s:?}")))
}

pub fn save_policy(path: &Path, file: &PolicyFile) -> Result<()> {
    fs::write(path, file.to_text()?)?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<PolicyFile> {
    PolicyFile::parse(&fs::read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// runs

/// Provenance stored next to a runs file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub arm: Arm,
    pub horizon: usize,
    pub num_runs: usize,
    pub seed: u64,
    pub discount: f64,
    pub model_sha256: String,
    pub policy_sha256: String,
    pub cost_sha256: String,
}

pub fn runs_header(horizon: usize) -> String {
    let mut h = String::from("run_id,true_x0,discounted_cost,goal,final_entropy,final_prob");
    for k in 0..=horizon {
        let _ = write!(h, ",entropy_{k}");
    }
    for k in 0..=horizon {
        let _ = write!(h, ",prob_{k}");
    }
    h
}

pub fn format_run_row(row: &RunRow) -> String {
    let mut s = format!(
        "{},{},{},{},{},{}",
        row.run_id,
        row.true_x0,
        row.discounted_cost,
        u8::from(row.goal),
        row.final_entropy(),
        row.final_prob()
    );
    for v in row.entropy_curve.iter().chain(&row.prob_curve) {
        let _ = write!(s, ",{v}");
    }
    s
}

pub fn write_runs(path: &Path, rows: &[RunRow], meta: &RunMeta) -> Result<()> {
    let mut out = String::new();
    out.push_str(&runs_header(meta.horizon));
    out.push('\n');
    for r in rows {
        out.push_str(&format_run_row(r));
        out.push('\n');
    }
    fs::write(path, out)?;
    write_json(&sidecar(path, ".meta.json"), meta)
}

pub fn read_runs(path: &Path) -> Result<(Vec<RunRow>, RunMeta)> {
    let meta: RunMeta = read_json(&sidecar(path, ".meta.json"))?;
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty runs file".into()))?;
    if header != runs_header(meta.horizon) {
        return Err(Error::ConfigMismatch(format!(
            "runs file header does not match horizon {}",
            meta.horizon
        )));
    }
    let points = meta.horizon + 1;
    let mut rows = Vec::with_capacity(meta.num_runs);
    for line in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 + 2 * points {
            return Err(Error::Parse(format!("runs line has {} fields", f.len())));
        }
        let nums =
            |range: std::ops::Range<usize>| -> Result<Vec<f64>> { f[range].iter().map(|v| parse_num(v)).collect() };
        rows.push(RunRow {
            run_id: parse_num(f[0])?,
            true_x0: parse_num(f[1])?,
            discounted_cost: parse_num(f[2])?,
            goal: match f[3] {
                "1" => true,
                "0" => false,
                other => return Err(Error::Parse(format!("goal flag {other:?}"))),
            },
            entropy_curve: nums(6..6 + points)?,
            prob_curve: nums(6 + points..6 + 2 * points)?,
        });
    }
    if rows.len() != meta.num_runs {
        return Err(Error::ConfigMismatch(format!(
            "runs file holds {} runs, metadata says {}",
            rows.len(),
            meta.num_runs
        )));
    }
    Ok((rows, meta))
}

/// One JSON object per line.
pub fn write_records(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&to_json_line(r)?);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
