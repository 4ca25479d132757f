//! Real-vector feature map over configurations.
//!
//! Prune layout per layer: `[r_i, c_i1..c_iK, merge_factor_i, output_scale_i]`
//! (followed by `m_i` when more than one merge method exists); fold layout per
//! layer: `[fold_select_i, importance_i]`. The mode code is appended last.

use super::{ensure_valid, Config, FoldConfig, Mode, PruneConfig, SpaceSpec};
use crate::error::{Error, Result};

fn per_layer(spec: &SpaceSpec) -> usize {
    match spec.mode {
        Mode::Fold => 2,
        _ => 1 + spec.k + 2 + usize::from(spec.z > 1),
    }
}

pub fn encoding_len(spec: &SpaceSpec) -> usize {
    spec.l * per_layer(spec) + 1
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn encode(config: &Config, spec: &SpaceSpec) -> Result<Vec<f64>> {
    ensure_valid(config, spec)?;
    let mut out = Vec::with_capacity(encoding_len(spec));
    match config {
        Config::Prune(p) => {
            for i in 0..spec.l {
                out.push(bit(p.r[i]));
                out.extend(p.c[i].iter().map(|&b| bit(b)));
                out.push(p.merge_factor[i]);
                out.push(p.output_scale[i]);
                if spec.z > 1 {
                    out.push(f64::from(p.m[i]));
                }
            }
        }
        Config::Fold(f) => {
            for i in 0..spec.l {
                out.push(bit(f.fold_select[i]));
                out.push(f.importance[i]);
            }
        }
    }
    out.push(spec.mode.code());
    Ok(out)
}

/// Inverse of [`encode`]; the result is validated.
pub fn decode(x: &[f64], spec: &SpaceSpec) -> Result<Config> {
    if x.len() != encoding_len(spec) {
        return Err(Error::Shape(format!(
            "encoding has length {}, expected {}",
            x.len(),
            encoding_len(spec)
        )));
    }
    if x[x.len() - 1] != spec.mode.code() {
        return Err(Error::config("encoding mode code does not match the search space"));
    }
    let width = per_layer(spec);
    let config: Config = if spec.mode == Mode::Fold {
        FoldConfig {
            fold_select: x.chunks_exact(width).map(|c| c[0] > 0.5).collect(),
            importance: x.chunks_exact(width).map(|c| c[1]).collect(),
        }
        .into()
    } else {
        let k = spec.k;
        let mut p = PruneConfig::identity(spec.l, k);
        for (i, chunk) in x.chunks_exact(width).enumerate() {
            p.r[i] = chunk[0] > 0.5;
            p.c[i] = chunk[1..1 + k].iter().map(|&v| v > 0.5).collect();
            p.merge_factor[i] = chunk[1 + k];
            p.output_scale[i] = chunk[2 + k];
            if spec.z > 1 {
                p.m[i] = chunk[3 + k] as u32;
            }
        }
        p.into()
    };
    ensure_valid(&config, spec)?;
    Ok(config)
}
