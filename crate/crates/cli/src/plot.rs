use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use trendlab_core::classical::convex_forward;
use trendlab_core::rng::{rng_for, standard_normal};
use trendlab_core::{load_model, StoredModel};

use crate::runlog::RunLog;
use crate::svg::{scale, Svg};

#[derive(Debug, Args)]
pub struct PlotStateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Recurrent or convex-net model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Slope of the up series (the down series uses its negative).
    #[arg(long)]
    pub slope: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub len: Option<usize>,
    /// Recurrent layer to read (default: the last).
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotRun {
    pub slope: f64,
    pub sigma: f64,
    pub len: usize,
    pub layer: Option<usize>,
    pub seed: u64,
}

impl Default for PlotRun {
    fn default() -> Self {
        Self { slope: 0.5, sigma: 1.0, len: 300, layer: None, seed: 0 }
    }
}

pub const TRENDS: [(&str, f64); 3] = [("up", 1.0), ("flat", 0.0), ("down", -1.0)];

/// Three noisy lines through the origin with slopes `+s`, `0` and `-s`.
pub fn trend_series(run: &PlotRun) -> Vec<Vec<f64>> {
    TRENDS
        .iter()
        .enumerate()
        .map(|(k, (_, sign))| {
            let mut rng = rng_for(run.seed, k as u64);
            (0..run.len).map(|t| sign * run.slope * t as f64 + run.sigma * standard_normal(&mut rng)).collect()
        })
        .collect()
}

pub fn hidden_states(model: &StoredModel, y: &[f64], layer: Option<usize>) -> Result<Vec<Vec<f64>>> {
    match model {
        StoredModel::Rnn(m) => {
            if m.spec.hidden_dim < 2 {
                bail!("hidden dimension must be at least 2 to plot states, model has {}", m.spec.hidden_dim);
            }
            let layer = layer.unwrap_or(m.spec.n_layers - 1);
            if layer >= m.spec.n_layers {
                bail!("layer {layer} requested, model has {} layers", m.spec.n_layers);
            }
            Ok(m.hidden_states(y, layer)?)
        }
        StoredModel::ConvexNet(p) => {
            if p.dim() < 2 {
                bail!("hidden dimension must be at least 2 to plot states, model has {}", p.dim());
            }
            Ok(convex_forward(p, y)?.states)
        }
        other => bail!("a {} model has no hidden state to plot", other.kind()),
    }
}

/// Top two principal axes of a point cloud.
pub struct PcaBasis {
    pub axes: [Vec<f64>; 2],
    /// Share of the total variance along each axis.
    pub explained: [f64; 2],
    pub mean: Vec<f64>,
}

impl PcaBasis {
    pub fn project(&self, h: &[f64]) -> [f64; 2] {
        [0, 1].map(|k| h.iter().zip(&self.mean).zip(&self.axes[k]).map(|((v, m), a)| (v - m) * a).sum::<f64>())
    }
}

/// Each axis is signed so that its largest-magnitude entry is positive, which
/// keeps the output stable.
pub fn principal_axes(states: &[Vec<f64>]) -> Result<PcaBasis> {
    let n = states.len();
    let m = states.first().map_or(0, Vec::len);
    if n < 2 || m < 2 {
        bail!("need at least two states of dimension >= 2 for a projection");
    }
    let mean: Vec<f64> = (0..m).map(|j| states.iter().map(|s| s[j]).sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(n, m, |i, j| states[i][j] - mean[j]);
    let cov = x.transpose() * &x / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let axis = |k: usize| {
        let mut v: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
        let big = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };
    let explained = [0, 1].map(|k| if total > 0.0 { eig.eigenvalues[order[k]].max(0.0) / total } else { 0.0 });
    Ok(PcaBasis { axes: [axis(0), axis(1)], explained, mean })
}

#[derive(Debug, Serialize)]
pub struct Separation {
    pub explained_variance: [f64; 2],
    pub centroids: Vec<(String, [f64; 2])>,
    /// Standard deviation of each trajectory along the first axis.
    pub spread_pc1: Vec<(String, f64)>,
    pub up_down_distance_pc1: f64,
    /// Whether the up/down distance exceeds twice the larger of their spreads.
    pub separated: bool,
}

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0).max(1.0)).sqrt()
}

pub fn separation(proj: &[Vec<[f64; 2]>], explained: [f64; 2]) -> Separation {
    let centroid = |p: &Vec<[f64; 2]>| {
        let n = p.len() as f64;
        [p.iter().map(|q| q[0]).sum::<f64>() / n, p.iter().map(|q| q[1]).sum::<f64>() / n]
    };
    let cs: Vec<[f64; 2]> = proj.iter().map(centroid).collect();
    let spreads: Vec<f64> = proj.iter().map(|p| sd(&p.iter().map(|q| q[0]).collect::<Vec<_>>())).collect();
    let dist = (cs[0][0] - cs[2][0]).abs();
    Separation {
        explained_variance: explained,
        centroids: TRENDS.iter().zip(&cs).map(|((n, _), c)| (n.to_string(), *c)).collect(),
        spread_pc1: TRENDS.iter().zip(&spreads).map(|((n, _), s)| (n.to_string(), *s)).collect(),
        up_down_distance_pc1: dist,
        separated: dist > 2.0 * spreads[0].max(spreads[2]),
    }
}

/// Light-to-dark ramp per trend so that later steps are darker.
const RAMPS: [([f64; 3], [f64; 3]); 3] = [
    ([199.0, 233.0, 192.0], [0.0, 68.0, 27.0]),
    ([217.0, 217.0, 217.0], [37.0, 37.0, 37.0]),
    ([252.0, 187.0, 161.0], [103.0, 0.0, 13.0]),
];

fn ramp(k: usize, f: f64) -> String {
    let (a, b) = RAMPS[k];
    let c: Vec<u8> = (0..3).map(|i| (a[i] + (b[i] - a[i]) * f).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn render(proj: &[Vec<[f64; 2]>], title: &str) -> String {
    let (w, h, pad) = (640.0, 520.0, 50.0);
    let all = proj.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let mut s = Svg::new(w, h);
    s.text(w / 2.0, 24.0, 14.0, "middle", title);
    s.rect(pad, pad, w - 2.0 * pad, h - 2.0 * pad, "none", "#888888");
    s.text(w / 2.0, h - 16.0, 11.0, "middle", "first principal component");
    s.text(14.0, h / 2.0, 11.0, "start", "PC2");
    for (k, traj) in proj.iter().enumerate() {
        let n = traj.len().max(2) as f64 - 1.0;
        for (t, p) in traj.iter().enumerate() {
            let cx = scale(p[0], x0, x1, pad + 5.0, w - pad - 5.0);
            let cy = scale(p[1], y0, y1, h - pad - 5.0, pad + 5.0);
            s.circle(cx, cy, 1.8, &ramp(k, t as f64 / n));
        }
        s.circle(w - pad - 70.0, pad + 16.0 + 16.0 * k as f64, 4.0, &ramp(k, 0.8));
        s.text(w - pad - 60.0, pad + 20.0 + 16.0 * k as f64, 11.0, "start", TRENDS[k].0);
    }
    s.finish()
}

pub fn run(a: PlotStateArgs) -> Result<()> {
    let mut cfg: PlotRun = crate::load_config(a.config.as_deref())?;
    cfg.slope = a.slope.unwrap_or(cfg.slope);
    cfg.sigma = a.sigma.unwrap_or(cfg.sigma);
    cfg.len = a.len.unwrap_or(cfg.len);
    cfg.layer = a.layer.or(cfg.layer);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    if cfg.len < 2 {
        bail!("series length must be at least 2");
    }
    let file = load_model(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let series = trend_series(&cfg);
    let states: Vec<Vec<Vec<f64>>> =
        series.iter().map(|y| hidden_states(&file.model, y, cfg.layer)).collect::<Result<_>>()?;
    let pooled: Vec<Vec<f64>> = states.iter().flatten().cloned().collect();
    let basis = principal_axes(&pooled)?;
    let proj: Vec<Vec<[f64; 2]>> = states.iter().map(|traj| traj.iter().map(|h| basis.project(h)).collect()).collect();
    let explained = basis.explained;
    let sep = separation(&proj, explained);

    crate::write_text(&a.out, &render(&proj, &format!("hidden states of {}", file.model.kind())))?;
    let stats_path = crate::sibling(&a.out, "pca.json");
    crate::write_json(&stats_path, &sep)?;
    RunLog::new("plot-state", Some(cfg.seed), &cfg)?
        .input(&a.model)
        .output(&a.out)
        .output(&stats_path)
        .write(&crate::sibling(&a.out, "run.json"))?;
    println!(
        "PC1 explains {:.1}% of state variance; up/down centroid distance {:.3} ({}) -> {}",
        100.0 * explained[0],
        sep.up_down_distance_pc1,
        if sep.separated { "separated" } else { "overlapping" },
        a.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axes_of_an_elongated_cloud() {
        // points along (1, 1) with a little spread along (1, -1)
        let pts: Vec<Vec<f64>> = (0..50)
            .flat_map(|i| {
                let t = i as f64 - 25.0;
                [vec![t + 0.1, t - 0.1], vec![t - 0.1, t + 0.1]]
            })
            .collect();
        let b = principal_axes(&pts).unwrap();
        let (axes, explained) = (b.axes, b.explained);
        let r = 0.5f64.sqrt();
        assert!((axes[0][0] - r).abs() < 1e-9 && (axes[0][1] - r).abs() < 1e-9);
        assert!((axes[1][0].abs() - r).abs() < 1e-9);
        assert!(explained[0] > 0.99);
    }

    #[test]
    fn ramp_darkens() {
        assert_eq!(ramp(1, 0.0), "#d9d9d9");
        assert_eq!(ramp(1, 1.0), "#252525");
    }
}
