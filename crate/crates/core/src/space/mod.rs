//! The pruning search space: removal bits, per-layer candidate selection and
//! merge hyperparameters, plus the fold-mode variant.

mod encode;
mod enumerate;
mod sample;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{decode, encode, encoding_len};
pub use enumerate::{cardinality, enumerate, DEFAULT_ENUMERATION_CAP};
pub use sample::{repair, sample, snap_to_grid, warm_start, WarmStart};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Removal, selection and task-arithmetic merging with output scaling.
    Full,
    /// Layer removal on the base model only.
    RemoveOnly,
    /// Removal plus picking at most one candidate per layer; no merging.
    SelectRemove,
    /// Removed layers are folded into their retained neighbour.
    Fold,
}

impl Mode {
    pub fn code(self) -> f64 {
        match self {
            Mode::Full => 0.0,
            Mode::RemoveOnly => 1.0,
            Mode::SelectRemove => 2.0,
            Mode::Fold => 3.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::RemoveOnly => "remove_only",
            Mode::SelectRemove => "select_remove",
            Mode::Fold => "fold",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "remove_only" => Ok(Mode::RemoveOnly),
            "select_remove" => Ok(Mode::SelectRemove),
            "fold" => Ok(Mode::Fold),
            other => Err(Error::config(format!("unknown search mode `{other}`"))),
        }
    }
}

/// Canonical value of every inert real-valued field.
pub const CANONICAL: f64 = 1.0;

pub fn default_merge_factor_grid() -> Vec<f64> {
    (0..=10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

pub fn default_output_scale_grid() -> Vec<f64> {
    (0..=10).map(|i| (50 + 10 * i) as f64 / 100.0).collect()
}

pub fn default_importance_grid() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

fn default_z() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceSpecDoc")]
pub struct SpaceSpec {
    pub l: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub sparsity: f64,
    pub remove_count: usize,
    #[serde(rename = "Z")]
    pub z: usize,
    pub merge_factor_grid: Vec<f64>,
    pub output_scale_grid: Vec<f64>,
    pub importance_grid: Vec<f64>,
    pub mode: Mode,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceSpecDoc {
    l: usize,
    #[serde(rename = "K")]
    k: usize,
    sparsity: f64,
    #[serde(default)]
    remove_count: Option<usize>,
    #[serde(rename = "Z", default = "default_z")]
    z: usize,
    #[serde(default = "default_merge_factor_grid")]
    merge_factor_grid: Vec<f64>,
    #[serde(default = "default_output_scale_grid")]
    output_scale_grid: Vec<f64>,
    #[serde(default = "default_importance_grid")]
    importance_grid: Vec<f64>,
    mode: Mode,
}

impl TryFrom<SpaceSpecDoc> for SpaceSpec {
    type Error = Error;

    fn try_from(d: SpaceSpecDoc) -> Result<Self> {
        let spec = SpaceSpec {
            l: d.l,
            k: d.k,
            sparsity: d.sparsity,
            remove_count: remove_count_for(d.l, d.sparsity),
            z: d.z,
            merge_factor_grid: d.merge_factor_grid,
            output_scale_grid: d.output_scale_grid,
            importance_grid: d.importance_grid,
            mode: d.mode,
        };
        if let Some(rc) = d.remove_count {
            if rc != spec.remove_count {
                return Err(Error::config(format!(
                    "remove_count {rc} disagrees with ceil(l·sparsity) = {}",
                    spec.remove_count
                )));
            }
        }
        spec.check()?;
        Ok(spec)
    }
}

/// `⌈l·s⌉`, tolerant of binary rounding in `s` (e.g. 1/3 · 3).
pub fn remove_count_for(l: usize, sparsity: f64) -> usize {
    let x = l as f64 * sparsity;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

impl SpaceSpec {
    /// Spec with the default grids.
    pub fn new(l: usize, k: usize, sparsity: f64, mode: Mode) -> Result<Self> {
        let spec = SpaceSpec {
            l,
            k,
            sparsity,
            remove_count: remove_count_for(l, sparsity),
            z: 1,
            merge_factor_grid: default_merge_factor_grid(),
            output_scale_grid: default_output_scale_grid(),
            importance_grid: default_importance_grid(),
            mode,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_grids(mut self, merge_factor_grid: Vec<f64>, output_scale_grid: Vec<f64>) -> Result<Self> {
        self.merge_factor_grid = merge_factor_grid;
        self.output_scale_grid = output_scale_grid;
        self.check()?;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_sparsity(mut self, sparsity: f64) -> Result<Self> {
        self.sparsity = sparsity;
        self.remove_count = remove_count_for(self.l, sparsity);
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::config("search space needs at least one layer"));
        }
        if !(0.0..=1.0).contains(&self.sparsity) {
            return Err(Error::config(format!("sparsity {} outside [0, 1]", self.sparsity)));
        }
        if self.remove_count > self.l {
            return Err(Error::config(format!(
                "remove_count {} exceeds layer count {}",
                self.remove_count, self.l
            )));
        }
        if self.z == 0 {
            return Err(Error::config("at least one merge method is required (Z >= 1)"));
        }
        check_grid("merge_factor_grid", &self.merge_factor_grid, 0.5, 1.0)?;
        check_grid("output_scale_grid", &self.output_scale_grid, 0.5, 1.5)?;
        check_grid("importance_grid", &self.importance_grid, f64::MIN_POSITIVE, 1.0)?;
        Ok(())
    }

    pub fn retained_count(&self) -> usize {
        self.l - self.remove_count
    }
}

fn check_grid(name: &str, grid: &[f64], lo: f64, hi: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::config(format!("{name} is empty")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config(format!("{name} must be strictly increasing")));
    }
    if grid.iter().any(|v| !(lo..=hi).contains(v)) {
        return Err(Error::config(format!("{name} values must lie in [{lo}, {hi}]")));
    }
    Ok(())
}

mod bits {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&b| u8::from(b)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        Vec::<u8>::deserialize(d)?
            .into_iter()
            .map(|b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(serde::de::Error::custom(format!("bit must be 0 or 1, got {other}"))),
            })
            .collect()
    }
}

mod bit_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<bool>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|row| row.iter().map(|&b| u8::from(b)).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<bool>>, D::Error> {
        Vec::<Vec<u8>>::deserialize(d)?
            .into_iter()
            .map(|row| {
                row.into_iter()
                    .map(|b| match b {
                        0 => Ok(false),
                        1 => Ok(true),
                        other => Err(serde::de::Error::custom(format!("bit must be 0 or 1, got {other}"))),
                    })
                    .collect()
            })
            .collect()
    }
}

/// One point of the removal/selection/merge space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneConfig {
    /// 1 = layer removed.
    #[serde(with = "bits")]
    pub r: Vec<bool>,
    /// Row i selects candidates for layer i; an all-zero row keeps the base layer.
    #[serde(with = "bit_rows")]
    pub c: Vec<Vec<bool>>,
    pub merge_factor: Vec<f64>,
    pub output_scale: Vec<f64>,
    /// Merge method ids in `1..=Z`.
    pub m: Vec<u32>,
}

impl PruneConfig {
    /// Every layer retained from the base at unit scale.
    pub fn identity(l: usize, k: usize) -> Self {
        PruneConfig {
            r: vec![false; l],
            c: vec![vec![false; k]; l],
            merge_factor: vec![CANONICAL; l],
            output_scale: vec![CANONICAL; l],
            m: vec![1; l],
        }
    }

    pub fn selected(&self, layer: usize) -> usize {
        self.c[layer].iter().filter(|&&b| b).count()
    }
}

/// Fold-mode point: removed layers are blended into a retained neighbour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldConfig {
    /// 1 = layer removed and folded.
    #[serde(with = "bits")]
    pub fold_select: Vec<bool>,
    pub importance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Config {
    Prune(PruneConfig),
    Fold(FoldConfig),
}

impl Config {
    pub fn removed(&self) -> &[bool] {
        match self {
            Config::Prune(p) => &p.r,
            Config::Fold(f) => &f.fold_select,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.removed().len()
    }

    pub fn removed_count(&self) -> usize {
        self.removed().iter().filter(|&&b| b).count()
    }

    /// Fraction of block layers removed; blocks are equal-sized, so this is
    /// also the fraction of block parameters removed.
    pub fn pruned_fraction(&self) -> f64 {
        if self.num_layers() == 0 {
            0.0
        } else {
            self.removed_count() as f64 / self.num_layers() as f64
        }
    }

    pub fn as_prune(&self) -> Option<&PruneConfig> {
        match self {
            Config::Prune(p) => Some(p),
            Config::Fold(_) => None,
        }
    }

    pub fn as_fold(&self) -> Option<&FoldConfig> {
        match self {
            Config::Fold(f) => Some(f),
            Config::Prune(_) => None,
        }
    }
}

impl From<PruneConfig> for Config {
    fn from(p: PruneConfig) -> Self {
        Config::Prune(p)
    }
}

impl From<FoldConfig> for Config {
    fn from(f: FoldConfig) -> Self {
        Config::Fold(f)
    }
}

/// For every removed layer, the retained layer it folds into: the nearest
/// retained layer below it, or above it when none exists below.
pub fn fold_targets(removed: &[bool]) -> Vec<Option<usize>> {
    let mut out = vec![None; removed.len()];
    let mut below = None;
    for (j, &rm) in removed.iter().enumerate() {
        if rm {
            out[j] = below;
        } else {
            below = Some(j);
        }
    }
    let mut above = None;
    for j in (0..removed.len()).rev() {
        if removed[j] {
            if out[j].is_none() {
                out[j] = above;
            }
        } else {
            above = Some(j);
        }
    }
    out
}

/// Which importance entries influence the folded model.
pub(crate) fn fold_active(removed: &[bool]) -> Vec<bool> {
    let targets = fold_targets(removed);
    let mut active = vec![false; removed.len()];
    for (j, t) in targets.iter().enumerate() {
        if let Some(i) = *t {
            active[j] = true;
            active[i] = true;
        }
    }
    active
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    WrongKind { mode: Mode },
    Length { field: &'static str, expected: usize, actual: usize },
    Sparsity { expected: usize, actual: usize },
    OffGrid { layer: usize, field: &'static str, value: f64 },
    NonCanonical { layer: usize, field: &'static str, value: f64 },
    ModeRestriction { layer: usize, mode: Mode, selected: usize },
    Method { layer: usize, value: u32, z: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::WrongKind { mode } => write!(f, "config kind does not match search mode {}", mode.name()),
            Violation::Length { field, expected, actual } => {
                write!(f, "{field} has length {actual}, expected {expected}")
            }
            Violation::Sparsity { expected, actual } => write!(
                f,
                "sparsity constraint violated: {actual} layers removed but remove_count is {expected}"
            ),
            Violation::OffGrid { layer, field, value } => {
                write!(f, "layer {layer}: {field} {value} is not a member of its grid")
            }
            Violation::NonCanonical { layer, field, value } => {
                if *field == "c" {
                    write!(f, "layer {layer}: removed layer must select no candidates, found {value}")
                } else {
                    write!(f, "layer {layer}: inert {field} must be {CANONICAL}, found {value}")
                }
            }
            Violation::ModeRestriction { layer, mode, selected } => write!(
                f,
                "layer {layer}: {selected} candidates selected, not allowed in mode {}",
                mode.name()
            ),
            Violation::Method { layer, value, z } => {
                write!(f, "layer {layer}: merge method {value} outside 1..={z}")
            }
        }
    }
}

fn on_grid(grid: &[f64], v: f64) -> bool {
    grid.contains(&v)
}

/// Lists every broken invariant; empty means valid.
pub fn validate(config: &Config, spec: &SpaceSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    match (config, spec.mode) {
        (Config::Fold(f), Mode::Fold) => validate_fold(f, spec, &mut out),
        (Config::Prune(p), mode) if mode != Mode::Fold => validate_prune(p, spec, &mut out),
        _ => out.push(Violation::WrongKind { mode: spec.mode }),
    }
    out
}

fn check_len(out: &mut Vec<Violation>, field: &'static str, expected: usize, actual: usize) -> bool {
    if expected != actual {
        out.push(Violation::Length { field, expected, actual });
        false
    } else {
        true
    }
}

fn validate_prune(p: &PruneConfig, spec: &SpaceSpec, out: &mut Vec<Violation>) {
    let l = spec.l;
    let mut ok = check_len(out, "r", l, p.r.len());
    ok &= check_len(out, "c", l, p.c.len());
    ok &= check_len(out, "merge_factor", l, p.merge_factor.len());
    ok &= check_len(out, "output_scale", l, p.output_scale.len());
    ok &= check_len(out, "m", l, p.m.len());
    for row in &p.c {
        ok &= check_len(out, "c row", spec.k, row.len());
    }
    if !ok {
        return;
    }
    let removed = p.r.iter().filter(|&&b| b).count();
    if removed != spec.remove_count {
        out.push(Violation::Sparsity {
            expected: spec.remove_count,
            actual: removed,
        });
    }
    for i in 0..l {
        let sel = p.selected(i);
        let canonical = |out: &mut Vec<Violation>, field, v: f64| {
            if v != CANONICAL {
                out.push(Violation::NonCanonical { layer: i, field, value: v });
            }
        };
        if p.r[i] {
            if sel != 0 {
                out.push(Violation::NonCanonical { layer: i, field: "c", value: sel as f64 });
            }
            canonical(out, "merge_factor", p.merge_factor[i]);
            canonical(out, "output_scale", p.output_scale[i]);
            if p.m[i] != 1 {
                out.push(Violation::Method { layer: i, value: p.m[i], z: 1 });
            }
            continue;
        }
        let allowed = match spec.mode {
            Mode::RemoveOnly => 0,
            Mode::SelectRemove => 1,
            _ => spec.k,
        };
        if sel > allowed {
            out.push(Violation::ModeRestriction { layer: i, mode: spec.mode, selected: sel });
        }
        if spec.mode == Mode::Full {
            if !on_grid(&spec.output_scale_grid, p.output_scale[i]) {
                out.push(Violation::OffGrid { layer: i, field: "output_scale", value: p.output_scale[i] });
            }
        } else {
            canonical(out, "output_scale", p.output_scale[i]);
        }
        if sel > 1 {
            if !on_grid(&spec.merge_factor_grid, p.merge_factor[i]) {
                out.push(Violation::OffGrid { layer: i, field: "merge_factor", value: p.merge_factor[i] });
            }
            if p.m[i] == 0 || p.m[i] as usize > spec.z {
                out.push(Violation::Method { layer: i, value: p.m[i], z: spec.z });
            }
        } else {
            canonical(out, "merge_factor", p.merge_factor[i]);
            if p.m[i] != 1 {
                out.push(Violation::Method { layer: i, value: p.m[i], z: 1 });
            }
        }
    }
}

fn validate_fold(f: &FoldConfig, spec: &SpaceSpec, out: &mut Vec<Violation>) {
    let ok = check_len(out, "fold_select", spec.l, f.fold_select.len())
        & check_len(out, "importance", spec.l, f.importance.len());
    if !ok {
        return;
    }
    let removed = f.fold_select.iter().filter(|&&b| b).count();
    if removed != spec.remove_count {
        out.push(Violation::Sparsity {
            expected: spec.remove_count,
            actual: removed,
        });
    }
    for (i, (&active, &w)) in fold_active(&f.fold_select).iter().zip(&f.importance).enumerate() {
        if active {
            if !on_grid(&spec.importance_grid, w) {
                out.push(Violation::OffGrid { layer: i, field: "importance", value: w });
            }
        } else if w != CANONICAL {
            out.push(Violation::NonCanonical { layer: i, field: "importance", value: w });
        }
    }
}

/// `validate` as a `Result`.
pub fn ensure_valid(config: &Config, spec: &SpaceSpec) -> Result<()> {
    let v = validate(config, spec);
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(v))
    }
}
