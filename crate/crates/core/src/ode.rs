//! Fixed-step classical RK4 over a flat state vector with named segments.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Any state component beyond this magnitude aborts the run.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// Ordered `(name, length)` segments with precomputed offsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    names: Vec<String>,
    offsets: Vec<usize>,
    lens: Vec<usize>,
    total: usize,
}

impl Layout {
    pub fn new<S: Into<String>>(segments: impl IntoIterator<Item = (S, usize)>) -> Self {
        let mut names = Vec::new();
        let mut offsets = Vec::new();
        let mut lens = Vec::new();
        let mut total = 0;
        for (name, len) in segments {
            names.push(name.into());
            offsets.push(total);
            lens.push(len);
            total += len;
        }
        Self {
            names,
            offsets,
            lens,
            total,
        }
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Index range of a named segment.
    pub fn range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(self.offsets[i]..self.offsets[i] + self.lens[i])
    }

    fn segment_at(&self, index: usize) -> &str {
        let i = self.offsets.partition_point(|&o| o <= index).saturating_sub(1);
        &self.names[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositeState {
    layout: Arc<Layout>,
    pub t: f64,
    data: Vec<f64>,
}

impl CompositeState {
    pub fn new(layout: Arc<Layout>, t: f64, data: Vec<f64>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::Structure(format!(
                "{} values for a layout of length {}",
                data.len(),
                layout.len()
            )));
        }
        Ok(Self { layout, t, data })
    }

    pub fn zeros(layout: Arc<Layout>, t: f64) -> Self {
        let data = vec![0.0; layout.len()];
        Self { layout, t, data }
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn segment(&self, name: &str) -> &[f64] {
        let r = self
            .layout
            .range(name)
            .unwrap_or_else(|| panic!("unknown segment `{name}`"));
        &self.data[r]
    }

    pub fn segment_mut(&mut self, name: &str) -> &mut [f64] {
        let r = self
            .layout
            .range(name)
            .unwrap_or_else(|| panic!("unknown segment `{name}`"));
        &mut self.data[r]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationConfig {
    pub h: f64,
    pub t_final: f64,
    pub record_stride: usize,
}

impl IntegrationConfig {
    pub fn new(h: f64, t_final: f64, record_stride: usize) -> Result<Self> {
        let cfg = Self {
            h,
            t_final,
            record_stride,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!("step h must be > 0, got {}", self.h)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("t_final must be >= 0, got {}", self.t_final)));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be positive".into()));
        }
        Ok(())
    }

    /// `⌈t_final / h⌉`, tolerant of round-off in the ratio.
    pub fn steps(&self) -> usize {
        let ratio = self.t_final / self.h;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }
}

fn check_derivative(t: f64, layout: &Layout, d: &[f64]) -> Result<()> {
    if d.len() != layout.len() {
        return Err(Error::Structure(format!(
            "rhs returned {} values for a layout of length {}",
            d.len(),
            layout.len()
        )));
    }
    if let Some(i) = d.iter().position(|v| !v.is_finite()) {
        return Err(Error::BlowUp {
            t,
            detail: format!("non-finite derivative in segment `{}`", layout.segment_at(i)),
        });
    }
    Ok(())
}

/// One classical RK4 step of size `h`.
pub fn rk4_step<F>(rhs: &F, s: &CompositeState, h: f64) -> Result<CompositeState>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
{
    if !(h > 0.0) {
        return Err(Error::Config(format!("step h must be > 0, got {h}")));
    }
    let layout = &s.layout;
    let y = &s.data;
    let t = s.t;
    let stage = |k: &[f64], c: f64| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + c * b).collect() };

    let k1 = rhs(t, y)?;
    check_derivative(t, layout, &k1)?;
    let k2 = rhs(t + 0.5 * h, &stage(&k1, 0.5 * h))?;
    check_derivative(t + 0.5 * h, layout, &k2)?;
    let k3 = rhs(t + 0.5 * h, &stage(&k2, 0.5 * h))?;
    check_derivative(t + 0.5 * h, layout, &k3)?;
    let k4 = rhs(t + h, &stage(&k3, h))?;
    check_derivative(t + h, layout, &k4)?;

    let data: Vec<f64> = (0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD) {
        return Err(Error::BlowUp {
            t: t + h,
            detail: format!(
                "|state| = {:e} in segment `{}`",
                data[i].abs(),
                layout.segment_at(i)
            ),
        });
    }
    Ok(CompositeState {
        layout: Arc::clone(layout),
        t: t + h,
        data,
    })
}

/// Integrates from `s0` to `cfg.t_final`.
///
/// `before_step(k, t)` runs once `k` steps are complete, before the next step
/// and before any recording at that point (for sample-and-hold inputs);
/// `recorder(k, state)` sees the initial state, every `record_stride`-th step
/// and the final state, where `k` counts completed steps.
pub fn integrate_with_hook<F, B, R>(
    rhs: &F,
    s0: CompositeState,
    cfg: &IntegrationConfig,
    mut before_step: B,
    mut recorder: R,
) -> Result<CompositeState>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
    B: FnMut(usize, f64),
    R: FnMut(usize, &CompositeState),
{
    cfg.validate()?;
    let steps = cfg.steps();
    let t0 = s0.t;
    before_step(0, t0);
    recorder(0, &s0);
    let mut s = s0;
    for k in 0..steps {
        let target = (t0 + (k + 1) as f64 * cfg.h).min(t0 + cfg.t_final);
        let h = target - s.t;
        let mut next = rk4_step(rhs, &s, h)?;
        next.t = target;
        s = next;
        let done = k + 1;
        before_step(done, s.t);
        if done % cfg.record_stride == 0 || done == steps {
            recorder(done, &s);
        }
    }
    Ok(s)
}

pub fn integrate<F, R>(rhs: &F, s0: CompositeState, cfg: &IntegrationConfig, recorder: R) -> Result<CompositeState>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>>,
    R: FnMut(usize, &CompositeState),
{
    integrate_with_hook(rhs, s0, cfg, |_, _| {}, recorder)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> CompositeState {
        CompositeState::new(Arc::new(Layout::new([("x", 1)])), 0.0, vec![x]).unwrap()
    }

    fn decay(_t: f64, y: &[f64]) -> Result<Vec<f64>> {
        Ok(y.iter().map(|v| -v).collect())
    }

    #[test]
    fn zero_rhs_only_advances_time() {
        let s = scalar(3.0);
        let next = rk4_step(&|_, y: &[f64]| Ok(vec![0.0; y.len()]), &s, 0.25).unwrap();
        assert_eq!(next.as_slice(), &[3.0]);
        assert_eq!(next.t, 0.25);
    }

    #[test]
    fn single_step_exponential() {
        let next = rk4_step(&decay, &scalar(1.0), 0.1).unwrap();
        assert!((next.as_slice()[0] - (-0.1f64).exp()).abs() <= 1e-7);
    }

    #[test]
    fn t_final_zero_records_once() {
        let cfg = IntegrationConfig::new(1e-3, 0.0, 10).unwrap();
        let mut calls = 0;
        let out = integrate(&decay, scalar(2.0), &cfg, |_, _| calls += 1).unwrap();
        assert_eq!(calls, 1);
        assert_eq!(out.as_slice(), &[2.0]);
    }

    #[test]
    fn unit_interval_decay() {
        let cfg = IntegrationConfig::new(1e-3, 1.0, 1000).unwrap();
        let out = integrate(&decay, scalar(1.0), &cfg, |_, _| {}).unwrap();
        assert!((out.as_slice()[0] - (-1.0f64).exp()).abs() <= 1e-10);
        assert_eq!(out.t, 1.0);
    }

    #[test]
    fn observer_gain_step_matches_series_exponential() {
        let a = [[-7.5, 1.0], [-25.0, 0.0]];
        let mv = |v: &[f64]| vec![a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]];
        let s = CompositeState::new(Arc::new(Layout::new([("x", 2)])), 0.0, vec![1.0, 0.0]).unwrap();
        let h = 0.01;
        let next = rk4_step(&|_, y: &[f64]| Ok(mv(y)), &s, h).unwrap();
        // exp(hA)x₀ by a 20-term Taylor series.
        let (mut term, mut sum) = (vec![1.0, 0.0], vec![1.0, 0.0]);
        for k in 1..20 {
            term = mv(&term).iter().map(|v| v * h / k as f64).collect();
            sum = sum.iter().zip(&term).map(|(a, b)| a + b).collect();
        }
        for (x, y) in next.as_slice().iter().zip(&sum) {
            assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn recorder_schedule_includes_final_partial_step() {
        // 0.35 / 0.1 → 4 steps, last one shortened.
        let cfg = IntegrationConfig::new(0.1, 0.35, 2).unwrap();
        let mut seen = Vec::new();
        integrate(&decay, scalar(1.0), &cfg, |k, s| seen.push((k, s.t))).unwrap();
        let ks: Vec<usize> = seen.iter().map(|p| p.0).collect();
        assert_eq!(ks, vec![0, 2, 4]);
        assert!((seen[2].1 - 0.35).abs() < 1e-15);
    }

    #[test]
    fn layout_mismatch_is_structural_error() {
        let bad = |_t: f64, _y: &[f64]| Ok(vec![0.0, 0.0]);
        assert!(matches!(rk4_step(&bad, &scalar(1.0), 0.1), Err(Error::Structure(_))));
    }

    #[test]
    fn blow_up_reports_time() {
        let explode = |_t: f64, y: &[f64]| Ok(y.iter().map(|v| 50.0 * v).collect());
        let cfg = IntegrationConfig::new(0.01, 10.0, 1).unwrap();
        match integrate(&explode, scalar(1.0), &cfg, |_, _| {}) {
            Err(Error::BlowUp { t, .. }) => assert!(t > 0.0 && t < 1.0, "t = {t}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
        let nan = |_t: f64, _y: &[f64]| Ok(vec![f64::NAN]);
        assert!(matches!(rk4_step(&nan, &scalar(1.0), 0.1), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn segments_resolve() {
        let layout = Arc::new(Layout::new([("a", 2), ("b", 3)]));
        let mut s = CompositeState::zeros(layout, 0.0);
        s.segment_mut("b")[2] = 5.0;
        assert_eq!(s.as_slice(), &[0.0, 0.0, 0.0, 0.0, 5.0]);
        assert_eq!(s.layout().segment_at(3), "b");
        assert!(CompositeState::new(Arc::clone(s.layout()), 0.0, vec![1.0]).is_err());
    }

    #[test]
    fn invalid_config() {
        assert!(IntegrationConfig::new(0.0, 1.0, 1).is_err());
        assert!(IntegrationConfig::new(0.1, -1.0, 1).is_err());
        assert!(IntegrationConfig::new(0.1, 1.0, 0).is_err());
        assert_eq!(IntegrationConfig::new(1e-3, 100.0, 1).unwrap().steps(), 100_000);
    }
}
