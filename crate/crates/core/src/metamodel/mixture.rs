use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};
use statrs::function::gamma::gamma;

use super::mlp::{Mlp, StoredMlp};
use super::train::{split_indices, train, Objective, TrainConfig};
use super::{Affine, MetamodelError, TrainReport};
use crate::dist::{beta_ln_pdf, digamma, sample_beta, sample_weibull, weibull_cdf, weibull_ln_pdf, weibull_mean};
use crate::rng::{derive_seed, stream, tag, SimRng};

/// Draws are clipped into `[BETA_CLIP, 1 - BETA_CLIP]` before Beta fits.
pub const BETA_CLIP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Beta,
    Weibull,
}

/// One mixture component. For Beta `a, b` are the shapes `alpha, beta`;
/// for Weibull they are the scale `lambda` and the shape `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub a: f64,
    pub b: f64,
}

impl Component {
    fn ln_pdf(&self, family: Family, x: f64) -> f64 {
        match family {
            Family::Beta => beta_ln_pdf(x, self.a, self.b),
            Family::Weibull => weibull_ln_pdf(x, self.a, self.b),
        }
    }

    fn cdf(&self, family: Family, x: f64) -> f64 {
        match family {
            Family::Beta => Beta::new(self.a, self.b).map(|d| d.cdf(x)).unwrap_or(f64::NAN),
            Family::Weibull => weibull_cdf(x, self.a, self.b),
        }
    }

    pub fn mean(&self, family: Family) -> f64 {
        match family {
            Family::Beta => self.a / (self.a + self.b),
            Family::Weibull => weibull_mean(self.a, self.b),
        }
    }
}

/// A finite mixture of Beta or Weibull densities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub family: Family,
    pub components: Vec<Component>,
}

impl Mixture {
    pub fn new(family: Family, components: Vec<Component>) -> Result<Self, MetamodelError> {
        let m = Self { family, components };
        m.check()?;
        Ok(m)
    }

    pub fn check(&self) -> Result<(), MetamodelError> {
        if self.components.is_empty() {
            return Err(MetamodelError::Data("mixture without components".into()));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 || self.components.iter().any(|c| !(c.weight > 0.0)) {
            return Err(MetamodelError::Data(format!("mixture weights sum to {total}")));
        }
        if self.components.iter().any(|c| !(c.a > 0.0 && c.b > 0.0)) {
            return Err(MetamodelError::Data("mixture parameters must be positive".into()));
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        match self.family {
            Family::Beta => (0.0, 1.0),
            Family::Weibull => (0.0, f64::INFINITY),
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(x > lo && x < hi) {
            return f64::NEG_INFINITY;
        }
        log_sum_exp(self.components.iter().map(|c| c.weight.ln() + c.ln_pdf(self.family, x)))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        self.components.iter().map(|c| c.weight * c.cdf(self.family, x)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean(self.family)).sum()
    }

    /// Picks a component by weight, then draws from it.
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (i, c) in self.components.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = i;
                break;
            }
        }
        let c = &self.components[pick];
        match self.family {
            Family::Beta => sample_beta(rng, c.a, c.b),
            Family::Weibull => sample_weibull(rng, c.a, c.b),
        }
    }

    /// Inverse CDF by bisection.
    pub fn quantile(&self, u: f64) -> f64 {
        let (lo, hi) = match self.family {
            Family::Beta => (0.0, 1.0),
            Family::Weibull => {
                let hi = self
                    .components
                    .iter()
                    .map(|c| c.a * 40f64.powf(1.0 / c.b))
                    .fold(0.0, f64::max);
                (0.0, hi)
            }
        };
        let (mut a, mut b) = (lo, hi);
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if self.cdf(m) < u {
                a = m;
            } else {
                b = m;
            }
            if b - a <= 1e-12 * hi.max(1.0) {
                break;
            }
        }
        0.5 * (a + b)
    }
}

pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Conditional mixture density: an MLP maps a conditioning point to the
/// weights (softmax) and positive parameters (softplus) of a mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureModel {
    pub family: Family,
    pub components: usize,
    pub mlp: Mlp,
    pub inputs: Affine,
    /// Unit of the first parameter; Weibull scales are expressed in
    /// multiples of the typical draw size.
    pub unit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredMixture {
    pub kind: String,
    pub family: Family,
    pub components: usize,
    pub network: StoredMlp,
    pub inputs: Affine,
    pub unit: f64,
}

/// Mixture implied by raw network outputs, plus the derivative of each
/// parameter with respect to its raw output.
pub(super) fn head(family: Family, c: usize, unit: f64, raw: &[f64]) -> (Mixture, Vec<(f64, f64)>) {
    let logits = &raw[..c];
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut comps = Vec::with_capacity(c);
    let mut derivs = Vec::with_capacity(c);
    for i in 0..c {
        let (ra, rb) = (raw[c + i], raw[2 * c + i]);
        let a_unit = match family {
            Family::Beta => 1.0,
            Family::Weibull => unit,
        };
        comps.push(Component {
            weight: exps[i] / total,
            a: a_unit * softplus(ra) + 1e-12,
            b: softplus(rb) + 1e-12,
        });
        derivs.push((a_unit * sigmoid(ra), sigmoid(rb)));
    }
    (
        Mixture {
            family,
            components: comps,
        },
        derivs,
    )
}

impl MixtureModel {
    pub fn mixture_at(&self, point: &[f64]) -> Mixture {
        let raw = self.mlp.forward(&self.inputs.apply(point));
        head(self.family, self.components, self.unit, &raw).0
    }

    pub fn pdf(&self, point: &[f64], x: f64) -> f64 {
        self.mixture_at(point).pdf(x)
    }

    pub fn sample(&self, point: &[f64], rng: &mut SimRng) -> f64 {
        self.mixture_at(point).sample(rng)
    }

    /// True when `point` lies outside the box spanned by the training inputs.
    pub fn extrapolates(&self, point: &[f64]) -> bool {
        self.inputs.outside(point)
    }

    pub fn to_stored(&self) -> StoredMixture {
        StoredMixture {
            kind: "mixture".into(),
            family: self.family,
            components: self.components,
            network: self.mlp.to_stored(),
            inputs: self.inputs.clone(),
            unit: self.unit,
        }
    }

    pub fn from_stored(s: &StoredMixture) -> Result<Self, MetamodelError> {
        let mlp = Mlp::from_stored(&s.network)?;
        if mlp.outputs() != 3 * s.components {
            return Err(MetamodelError::Checkpoint("output width does not match components".into()));
        }
        Ok(Self {
            family: s.family,
            components: s.components,
            mlp,
            inputs: s.inputs.clone(),
            unit: s.unit,
        })
    }
}

/// Points with `K` draws each.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DensityDataset {
    pub inputs: Vec<Vec<f64>>,
    pub draws: Vec<Vec<f64>>,
}

impl DensityDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Validated copy ready for fitting; Beta draws are clipped into the
    /// open unit interval.
    pub fn prepared(&self, family: Family) -> Result<Self, MetamodelError> {
        if self.inputs.is_empty() || self.inputs.len() != self.draws.len() {
            return Err(MetamodelError::Data("inputs and draws must be nonempty and aligned".into()));
        }
        let mut out = self.clone();
        for row in &mut out.draws {
            if row.is_empty() {
                return Err(MetamodelError::Data("point without draws".into()));
            }
            for x in row.iter_mut() {
                match family {
                    Family::Beta => {
                        if !(0.0..=1.0).contains(x) {
                            return Err(MetamodelError::Data(format!("draw {x} outside [0, 1]")));
                        }
                        *x = x.clamp(BETA_CLIP, 1.0 - BETA_CLIP);
                    }
                    Family::Weibull => {
                        if !(*x > 0.0 && x.is_finite()) {
                            return Err(MetamodelError::Data(format!("draw {x} is not positive")));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

pub(super) struct Nll {
    pub(super) family: Family,
    pub(super) components: usize,
    pub(super) unit: f64,
    pub(super) inputs: Vec<Vec<f64>>,
    pub(super) draws: Vec<Vec<f64>>,
}

impl Objective for Nll {
    fn input(&self, item: usize) -> &[f64] {
        &self.inputs[item]
    }

    fn loss(&self, item: usize, out: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let c = self.components;
        let (mix, derivs) = head(self.family, c, self.unit, out);
        let mut total = 0.0;
        let mut g_logit = vec![0.0; c];
        let mut g_a = vec![0.0; c];
        let mut g_b = vec![0.0; c];
        let want_grad = grad.is_some();
        let mut lp = vec![0.0; c];
        for &x in &self.draws[item] {
            for (l, comp) in lp.iter_mut().zip(&mix.components) {
                *l = comp.weight.ln() + comp.ln_pdf(self.family, x);
            }
            let lse = log_sum_exp(lp.iter().cloned());
            total -= lse;
            if !want_grad {
                continue;
            }
            for i in 0..c {
                let r = (lp[i] - lse).exp();
                let comp = &mix.components[i];
                g_logit[i] -= r - comp.weight;
                let (da, db) = match self.family {
                    Family::Beta => {
                        let s = digamma(comp.a + comp.b);
                        (x.ln() - digamma(comp.a) + s, (1.0 - x).ln() - digamma(comp.b) + s)
                    }
                    Family::Weibull => {
                        let (lam, k) = (comp.a, comp.b);
                        let z = (x / lam).ln();
                        let p = (k * z).exp();
                        ((k / lam) * (p - 1.0), 1.0 / k + z - p * z)
                    }
                };
                g_a[i] -= r * da;
                g_b[i] -= r * db;
            }
        }
        if let Some(g) = grad {
            for i in 0..c {
                g[i] = g_logit[i];
                g[c + i] = g_a[i] * derivs[i].0;
                g[2 * c + i] = g_b[i] * derivs[i].1;
            }
        }
        total
    }
}

/// Per-component starting parameters from the pooled draws: the sorted
/// sample is cut into `c` blocks and each block is matched by moments.
fn initial_components(family: Family, draws: &[Vec<f64>], c: usize) -> Vec<(f64, f64)> {
    let mut pooled: Vec<f64> = draws.iter().flatten().cloned().collect();
    pooled.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = pooled.len();
    (0..c)
        .map(|i| {
            let block = &pooled[i * n / c..((i + 1) * n / c).max(i * n / c + 1).min(n)];
            let m = block.iter().sum::<f64>() / block.len() as f64;
            let v = block.iter().map(|x| (x - m).powi(2)).sum::<f64>() / block.len() as f64;
            match family {
                Family::Beta => {
                    let m = m.clamp(1e-3, 1.0 - 1e-3);
                    let conc = if v > 0.0 { (m * (1.0 - m) / v - 1.0).clamp(0.5, 1e3) } else { 1e3 };
                    (m * conc, (1.0 - m) * conc)
                }
                Family::Weibull => {
                    let cv = if m > 0.0 { v.sqrt() / m } else { 1.0 };
                    let k = (1.28 / cv.max(1e-3)).clamp(0.5, 200.0);
                    (m / gamma(1.0 + 1.0 / k), k)
                }
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct MixtureFit {
    pub model: MixtureModel,
    /// Mean over held-out points of the NLL summed over each point's draws.
    pub test_nll: f64,
    /// The same NLL divided by the number of draws.
    pub test_nll_per_draw: f64,
    pub report: TrainReport,
}

pub(crate) fn fit_rows(
    data: &DensityDataset,
    family: Family,
    components: usize,
    hidden: &[usize],
    train_items: &[usize],
    validation: &[usize],
    config: &TrainConfig,
    seed: u64,
) -> Result<(MixtureModel, TrainReport), MetamodelError> {
    let rows: Vec<&[f64]> = train_items.iter().map(|&i| data.inputs[i].as_slice()).collect();
    let inputs = Affine::standardize(&rows);
    let train_draws: Vec<Vec<f64>> = train_items.iter().map(|&i| data.draws[i].clone()).collect();
    let unit = match family {
        Family::Beta => 1.0,
        Family::Weibull => {
            let all: Vec<f64> = train_draws.iter().flatten().cloned().collect();
            all.iter().sum::<f64>() / all.len() as f64
        }
    };
    let objective = Nll {
        family,
        components,
        unit,
        inputs: data.inputs.iter().map(|x| inputs.apply(x)).collect(),
        draws: data.draws.clone(),
    };
    let (fit_items, val_items) = if validation.is_empty() && config.validation_fraction > 0.0 && train_items.len() >= 10 {
        let (a, b) = split_indices(train_items.len(), config.validation_fraction, derive_seed(seed, &[tag("validation")]));
        (
            a.iter().map(|&j| train_items[j]).collect::<Vec<_>>(),
            b.iter().map(|&j| train_items[j]).collect::<Vec<_>>(),
        )
    } else {
        (train_items.to_vec(), validation.to_vec())
    };
    let mut rng = stream(seed, &[tag("train")]);
    let mut sizes = vec![data.inputs[0].len()];
    sizes.extend_from_slice(hidden);
    sizes.push(3 * components);
    let mut mlp = Mlp::new(&sizes, &mut rng);
    let init = initial_components(family, &train_draws, components);
    let bias = mlp.output_bias_mut();
    for (i, (a, b)) in init.iter().enumerate() {
        bias[components + i] = softplus_inv(a / unit);
        bias[2 * components + i] = softplus_inv(*b);
    }
    let fitted = train(mlp, &objective, &fit_items, &val_items, config, &mut rng)?;
    Ok((
        MixtureModel {
            family,
            components,
            mlp: fitted.mlp,
            inputs,
            unit,
        },
        TrainReport {
            initial_loss: fitted.initial_loss,
            final_loss: fitted.final_loss,
            epochs: fitted.epochs,
        },
    ))
}

/// Mean summed NLL and mean per-draw NLL of `model` over `items`.
pub fn nll(model: &MixtureModel, data: &DensityDataset, items: &[usize]) -> (f64, f64) {
    let (mut total, mut draws) = (0.0, 0usize);
    for &i in items {
        let mix = model.mixture_at(&data.inputs[i]);
        for &x in &data.draws[i] {
            total -= mix.ln_pdf(x);
        }
        draws += data.draws[i].len();
    }
    (total / items.len().max(1) as f64, total / draws.max(1) as f64)
}

/// Fits a conditional mixture, reports the held-out NLL and returns the
/// model refitted on every point.
pub fn fit_mixture(
    data: &DensityDataset,
    family: Family,
    components: usize,
    hidden: &[usize],
    config: &TrainConfig,
) -> Result<MixtureFit, MetamodelError> {
    config.validate()?;
    if components == 0 {
        return Err(MetamodelError::Config("at least one component is required".into()));
    }
    let data = data.prepared(family)?;
    let (train_items, test_items) = split_indices(data.len(), config.test_fraction, derive_seed(config.seed, &[tag("split")]));
    let (model, report) = fit_rows(&data, family, components, hidden, &train_items, &[], config, derive_seed(config.seed, &[tag("fit")]))?;
    let eval = if test_items.is_empty() { &train_items } else { &test_items };
    let (test_nll, test_nll_per_draw) = nll(&model, &data, eval);
    let all: Vec<usize> = (0..data.len()).collect();
    let (model, _) = fit_rows(&data, family, components, hidden, &all, &[], config, derive_seed(config.seed, &[tag("refit")]))?;
    Ok(MixtureFit {
        model,
        test_nll,
        test_nll_per_draw,
        report,
    })
}
