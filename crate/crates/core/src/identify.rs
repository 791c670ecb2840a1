//! Exact-frequency filtering, frequency-response estimation and ODE fitting.
//!
//! Noise on the inputs and outputs occupies frequencies disjoint from the
//! exact signals, and a linear channel cannot create new frequencies. So the
//! exact input frequencies of a channel are those that survive in the
//! output once the shared link lines are removed from the input set. At
//! those frequencies `W(jω) = C_y(ω) / C_x(ω)`, and for the model
//! `Σ a_k y^(k) = x` the coefficients solve `Σ a_k (jω)^k = 1/W(jω)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::{jw_polynomial, ChannelResponse};
use crate::error::{ApsiError, Result, Warning};
use crate::freqset::{difference, intersect, FrequencySet};
use crate::signal::SampledRecord;
use crate::spectral::fourier_exponent;
use crate::ComplexValue;

/// Largest acceptable condition number of the scaled least-squares system.
pub const MAX_CONDITION: f64 = 1e12;

/// Default relative floor on input exponents in [`estimate_frf`].
pub const DEFAULT_INPUT_FLOOR: f64 = 1e-6;

/// Default relative residual tolerance for [`select_order`].
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-3;

/// Sampled frequency response.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    points: Vec<(f64, ComplexValue)>,
}

impl FrequencyResponse {
    pub fn new(points: Vec<(f64, ComplexValue)>) -> Result<Self> {
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ApsiError::invalid("frequency response points must be strictly increasing"));
        }
        if points
            .iter()
            .any(|(w, v)| !(w.is_finite() && *w >= 0.0 && v.re.is_finite() && v.im.is_finite()))
        {
            return Err(ApsiError::invalid("frequency response values must be finite"));
        }
        Ok(Self { points })
    }

    /// Analytic response of `channel` at the given frequencies.
    pub fn from_channel(channel: &ChannelResponse, omegas: &[f64]) -> Result<Self> {
        Self::new(omegas.iter().map(|&w| (w, channel.response(w))).collect())
    }

    pub fn points(&self) -> &[(f64, ComplexValue)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }
}

/// Coefficients `a_0..a_n` of `Σ a_k y^(k) = x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct OdeModel {
    coefficients: Vec<f64>,
    residual: f64,
    converged: bool,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    order: usize,
    coefficients: Vec<f64>,
    residual: f64,
    converged: bool,
}

impl TryFrom<RawModel> for OdeModel {
    type Error = ApsiError;

    fn try_from(raw: RawModel) -> Result<Self> {
        if raw.coefficients.len() != raw.order + 1 {
            return Err(ApsiError::invalid(format!(
                "order {} needs {} coefficients, got {}",
                raw.order,
                raw.order + 1,
                raw.coefficients.len()
            )));
        }
        let mut model = OdeModel::new(raw.coefficients)?;
        model.residual = raw.residual;
        model.converged = raw.converged;
        Ok(model)
    }
}

impl From<OdeModel> for RawModel {
    fn from(m: OdeModel) -> Self {
        RawModel {
            order: m.order(),
            coefficients: m.coefficients,
            residual: m.residual,
            converged: m.converged,
        }
    }
}

impl OdeModel {
    /// An exact model with zero residual.
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(ApsiError::invalid("ODE model needs order n ≥ 1"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(ApsiError::invalid("ODE coefficients must be finite"));
        }
        if coefficients.last() == Some(&0.0) {
            return Err(ApsiError::invalid("leading ODE coefficient must be nonzero"));
        }
        Ok(Self {
            coefficients,
            residual: 0.0,
            converged: true,
        })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Relative ℓ2 misfit of the fitted linear system.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// False when order selection found no order under the residual tolerance.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// `W(jω) = 1 / Σ a_k (jω)^k`.
    pub fn response(&self, omega: f64) -> ComplexValue {
        jw_polynomial(&self.coefficients, omega).inv()
    }

    pub fn as_channel(&self) -> ChannelResponse {
        ChannelResponse::Ode {
            coefficients: self.coefficients.clone(),
        }
    }
}

/// Filtered exact-frequency set plus diagnostics.
#[derive(Debug, Clone)]
pub struct Filtered {
    pub set: FrequencySet,
    pub warnings: Vec<Warning>,
}

/// `(input \ link) ∩ output`: the exact input frequencies that drive the output.
pub fn filter_exact_frequencies(
    input_set: &FrequencySet,
    output_set: &FrequencySet,
    link_set: &FrequencySet,
) -> Filtered {
    let conditional = difference(input_set, link_set);
    let set = intersect(&conditional, output_set);
    let warnings = if set.is_empty() {
        vec![Warning::NoCommonSupport]
    } else {
        Vec::new()
    };
    Filtered { set, warnings }
}

/// Estimated response plus skipped-point diagnostics.
#[derive(Debug, Clone)]
pub struct FrfEstimate {
    pub response: FrequencyResponse,
    pub warnings: Vec<Warning>,
}

/// `W(jω_k) = C_y(ω_k) / C_x(ω_k)` at every exact frequency, with the default input floor.
pub fn estimate_frf(
    input_record: &SampledRecord,
    output_record: &SampledRecord,
    exact_set: &FrequencySet,
) -> Result<FrfEstimate> {
    estimate_frf_with_floor(input_record, output_record, exact_set, DEFAULT_INPUT_FLOOR)
}

/// As [`estimate_frf`]; points whose input exponent is below `floor` times the
/// strongest one are skipped.
pub fn estimate_frf_with_floor(
    input_record: &SampledRecord,
    output_record: &SampledRecord,
    exact_set: &FrequencySet,
    floor: f64,
) -> Result<FrfEstimate> {
    if input_record.len() != output_record.len()
        || (input_record.dt() - output_record.dt()).abs() > 1e-12 * input_record.dt()
    {
        return Err(ApsiError::invalid("input and output records must share dt and span"));
    }
    let exponents = exact_set
        .frequencies()
        .iter()
        .map(|&w| Ok((w, fourier_exponent(input_record, w)?, fourier_exponent(output_record, w)?)))
        .collect::<Result<Vec<_>>>()?;
    let strongest = exponents.iter().map(|(_, cx, _)| cx.norm()).fold(0.0, f64::max);

    let mut warnings = Vec::new();
    let mut points = Vec::with_capacity(exponents.len());
    for (w, cx, cy) in exponents {
        let magnitude = cx.norm();
        if magnitude == 0.0 || magnitude < floor * strongest {
            warnings.push(Warning::WeakInputLine { omega: w, magnitude });
            continue;
        }
        points.push((w, cy / cx));
    }
    if points.is_empty() {
        return Err(ApsiError::EstimationFailed(format!(
            "no usable input line among {} exact frequencies",
            exact_set.len()
        )));
    }
    Ok(FrfEstimate {
        response: FrequencyResponse::new(points)?,
        warnings,
    })
}

/// Minimum number of response points that determine an order-`n` model.
pub fn min_points_for_order(order: usize) -> usize {
    (order + 2) / 2
}

/// Least-squares fit of `Σ a_k (jω)^k = 1/W(jω)` for a fixed order.
pub fn fit_ode(frf: &FrequencyResponse, order: usize) -> Result<OdeModel> {
    if order == 0 {
        return Err(ApsiError::invalid("ODE order must be at least 1"));
    }
    let needed = min_points_for_order(order);
    if frf.len() < needed {
        return Err(ApsiError::invalid(format!(
            "order {order} needs at least {needed} response points, got {}",
            frf.len()
        )));
    }
    if let Some((w, _)) = frf.points().iter().find(|(_, v)| v.norm() == 0.0) {
        return Err(ApsiError::invalid(format!("response vanishes at {w} rad/s")));
    }

    // Unit geometric mean of the nonzero frequencies.
    let positive: Vec<f64> = frf.points().iter().map(|p| p.0).filter(|&w| w > 0.0).collect();
    let scale = if positive.is_empty() {
        1.0
    } else {
        (positive.iter().map(|w| w.ln()).sum::<f64>() / positive.len() as f64).exp()
    };

    let rows = 2 * frf.len();
    let cols = order + 1;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (i, &(w, value)) in frf.points().iter().enumerate() {
        let s = ComplexValue::new(0.0, w / scale);
        let mut power = ComplexValue::new(1.0, 0.0);
        for k in 0..cols {
            a[(2 * i, k)] = power.re;
            a[(2 * i + 1, k)] = power.im;
            power *= s;
        }
        let target = value.inv();
        rhs[2 * i] = target.re;
        rhs[2 * i + 1] = target.im;
    }

    let svd = a.clone().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if condition.is_nan() || condition > MAX_CONDITION {
        return Err(ApsiError::FitFailed { condition });
    }
    let scaled = svd
        .solve(&rhs, 0.0)
        .map_err(|_| ApsiError::FitFailed { condition })?;

    let misfit = (&a * &scaled - &rhs).norm();
    let residual = misfit / rhs.norm();
    let coefficients: Vec<f64> = scaled
        .iter()
        .enumerate()
        .map(|(k, b)| b / scale.powi(k as i32))
        .collect();
    if coefficients[order] == 0.0 || coefficients.iter().any(|c| !c.is_finite()) {
        return Err(ApsiError::FitFailed { condition });
    }
    Ok(OdeModel {
        coefficients,
        residual,
        converged: true,
    })
}

/// Smallest order in `1..=max_order` with residual below `residual_tol`.
///
/// When no order qualifies, the minimum-residual model is returned with
/// `converged == false`.
pub fn select_order(frf: &FrequencyResponse, max_order: usize, residual_tol: f64) -> Result<OdeModel> {
    if max_order == 0 {
        return Err(ApsiError::invalid("max order must be at least 1"));
    }
    let needed = min_points_for_order(max_order);
    if frf.len() < needed {
        return Err(ApsiError::invalid(format!(
            "max order {max_order} needs at least {needed} response points, got {}",
            frf.len()
        )));
    }
    let mut best: Option<OdeModel> = None;
    let mut last_err = None;
    for order in 1..=max_order {
        match fit_ode(frf, order) {
            Ok(model) if model.residual < residual_tol => return Ok(model),
            Ok(model) => {
                if best.as_ref().is_none_or(|b| model.residual < b.residual) {
                    best = Some(model);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(mut model) => {
            model.converged = false;
            Ok(model)
        }
        None => Err(last_err.expect("at least one order was attempted")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize, ApSignal};
    use approx::assert_abs_diff_eq;

    fn set(freqs: &[f64], delta: f64) -> FrequencySet {
        FrequencySet::new(freqs.to_vec(), delta).unwrap()
    }

    fn analytic(coefficients: &[f64], omegas: &[f64]) -> FrequencyResponse {
        FrequencyResponse::from_channel(&ChannelResponse::ode(coefficients.to_vec()).unwrap(), omegas).unwrap()
    }

    #[test]
    fn filtering_constructive_case() {
        let f = filter_exact_frequencies(
            &set(&[1.0, 1.7, 3.0], 0.01),
            &set(&[1.0, 3.0, 4.2], 0.01),
            &FrequencySet::empty(0.01).unwrap(),
        );
        assert_eq!(f.set.frequencies(), &[1.0, 3.0]);
        assert!(f.warnings.is_empty());
    }

    #[test]
    fn filtering_disjoint_sets_warns() {
        let f = filter_exact_frequencies(
            &set(&[1.0, 2.0], 0.01),
            &set(&[5.0, 6.0], 0.01),
            &FrequencySet::empty(0.01).unwrap(),
        );
        assert!(f.set.is_empty());
        assert_eq!(f.warnings, vec![Warning::NoCommonSupport]);
    }

    #[test]
    fn filtering_removes_link() {
        let f = filter_exact_frequencies(
            &set(&[1.0, 2.0, 6.0], 0.01),
            &set(&[1.0, 6.0, 8.0], 0.01),
            &set(&[6.0], 0.01),
        );
        assert_eq!(f.set.frequencies(), &[1.0]);
    }

    #[test]
    fn identity_frf() {
        let x = ApSignal::from_triples(&[(1.0, 1.0, 0.2), (2.5, 0.5, -0.3)]).unwrap();
        let r = synthesize(&x, 200.0, 0.01).unwrap();
        let est = estimate_frf(&r, &r, &set(&[1.0, 2.5], 0.03)).unwrap();
        for (_, w) in est.response.points() {
            assert_abs_diff_eq!(w.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(w.im, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn newton_frf() {
        let x = ApSignal::from_triples(&[(2.0, 1.0, 0.0), (5.0, 1.0, 1.0)]).unwrap();
        let k = ChannelResponse::ode(vec![0.0, 0.0, 2.0]).unwrap();
        let y = crate::channel::apply_channel(&x, &k);
        let rx = synthesize(&x, 200.0, 0.01).unwrap();
        let ry = synthesize(&y, 200.0, 0.01).unwrap();
        let est = estimate_frf(&rx, &ry, &set(&[2.0], 0.03)).unwrap();
        let (_, w) = est.response.points()[0];
        assert_abs_diff_eq!(w.re, -0.125, epsilon = 1e-3);
        assert_abs_diff_eq!(w.im, 0.0, epsilon = 1e-3);
    }

    #[test]
    fn frf_fails_without_usable_points() {
        let r = SampledRecord::new(vec![0.0; 1001], 0.01).unwrap();
        let err = estimate_frf(&r, &r, &set(&[1.0], 0.1)).unwrap_err();
        assert!(matches!(err, ApsiError::EstimationFailed(_)));
        let empty = estimate_frf(&r, &r, &FrequencySet::empty(0.1).unwrap()).unwrap_err();
        assert!(matches!(empty, ApsiError::EstimationFailed(_)));
    }

    #[test]
    fn frf_skips_weak_lines() {
        let x = ApSignal::from_triples(&[(1.0, 1.0, 0.0)]).unwrap();
        let r = synthesize(&x, 200.0, 0.01).unwrap();
        // 4 rad/s carries only leakage of the 1 rad/s line.
        let est = estimate_frf_with_floor(&r, &r, &set(&[1.0, 4.0], 0.03), 1e-2).unwrap();
        assert_eq!(est.response.len(), 1);
        assert!(matches!(est.warnings[0], Warning::WeakInputLine { .. }));
    }

    #[test]
    fn frf_grid_mismatch() {
        let a = SampledRecord::new(vec![1.0; 100], 0.01).unwrap();
        let b = SampledRecord::new(vec![1.0; 101], 0.01).unwrap();
        assert!(estimate_frf(&a, &b, &set(&[1.0], 0.1)).is_err());
    }

    #[test]
    fn fit_newton_model() {
        let frf = analytic(&[0.0, 0.0, 2.0], &[1.0, 2.0, 3.0]);
        let m = fit_ode(&frf, 2).unwrap();
        for (got, want) in m.coefficients().iter().zip([0.0, 0.0, 2.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
        assert!(m.residual() < 1e-12);
    }

    #[test]
    fn fit_first_order_lag() {
        let frf = analytic(&[1.0, 0.5], &[1.0, 2.0, 4.0]);
        let m = fit_ode(&frf, 1).unwrap();
        assert_abs_diff_eq!(m.coefficients()[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(m.coefficients()[1], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let frf = FrequencyResponse::new(vec![(1.0, ComplexValue::new(0.0, 0.0))]).unwrap();
        assert!(matches!(fit_ode(&frf, 1), Err(ApsiError::InvalidArgument(_))));
        let frf = analytic(&[1.0, 0.3, 0.2, 0.1], &[1.0]);
        assert!(matches!(fit_ode(&frf, 3), Err(ApsiError::InvalidArgument(_))));
        assert!(fit_ode(&frf, 0).is_err());
    }

    #[test]
    fn fit_detects_rank_deficiency() {
        // A DC point carries no odd-power information: order 3 is rank deficient.
        let frf = FrequencyResponse::new(vec![(0.0, ComplexValue::new(1.0, 0.0)), (1.0, ComplexValue::new(0.5, -0.5))]).unwrap();
        match fit_ode(&frf, 3) {
            Err(ApsiError::FitFailed { condition }) => assert!(condition > MAX_CONDITION),
            other => panic!("expected fit failure, got {other:?}"),
        }
    }

    #[test]
    fn select_order_picks_minimal_exact_order() {
        let omegas = [0.5, 1.0, 1.7, 2.5, 4.0];
        let frf = analytic(&[1.0, 0.4, 0.25], &omegas);
        // Brute force: the best first-order fit leaves a large residual.
        let first = fit_ode(&frf, 1).unwrap();
        assert!(first.residual() > 1e-6);
        let m = select_order(&frf, 5, 1e-6).unwrap();
        assert_eq!(m.order(), 2);
        assert!(m.converged());
    }

    #[test]
    fn select_order_single_point() {
        let frf = analytic(&[2.0, 0.3], &[1.5]);
        let m = select_order(&frf, 1, 1e-6).unwrap();
        assert_eq!(m.order(), 1);
        assert_abs_diff_eq!(m.coefficients()[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.coefficients()[1], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn select_order_flags_unconverged() {
        let omegas: Vec<f64> = (1..=10).map(|k| 0.4 * k as f64).collect();
        let exact = analytic(&[1.0, 0.4, 0.25], &omegas);
        let noisy = FrequencyResponse::new(
            exact
                .points()
                .iter()
                .enumerate()
                .map(|(i, &(w, v))| (w, v * if i % 2 == 0 { 1.1 } else { 0.9 }))
                .collect(),
        )
        .unwrap();
        let m = select_order(&noisy, 3, 1e-6).unwrap();
        assert!(!m.converged());
        for order in 1..=3 {
            assert!(fit_ode(&noisy, order).unwrap().residual() >= m.residual());
        }
    }

    #[test]
    fn model_json_shape() {
        let m = OdeModel::new(vec![1.0, 0.5]).unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["order"], 1);
        assert_eq!(v["converged"], true);
        let back: OdeModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<OdeModel>(r#"{"order":2,"coefficients":[1,2],"residual":0,"converged":true}"#).is_err());
    }
}
