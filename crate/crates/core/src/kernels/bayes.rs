use super::{neg, pos, FunctionalKind, RiskFunctional};
use crate::error::{Error, Result};

/// Bayes loss `S(x, z)` whose expectation is minimized at the statistic and
/// whose minimal value is the regulatory risk measure:
///
/// * (Var, E): `(x - z)^2`
/// * (ES, VaR): `z + (x - z)_+ / (1 - p)`
/// * (var_p, ex_p): `p (x - z)_+^2 + (1 - p) (x - z)_-^2`
pub fn bayes_loss(functional: &RiskFunctional, x: f64, z: f64) -> Result<f64> {
    let p = functional.level();
    match functional.kind {
        FunctionalKind::MeanVariance => Ok((x - z).powi(2)),
        FunctionalKind::EsVar => Ok(z + pos(x - z) / (1.0 - p)),
        FunctionalKind::ExpectileVariantile => Ok(p * pos(x - z).powi(2) + (1.0 - p) * neg(x - z).powi(2)),
        k => Err(Error::Unsupported(format!("{k} is not a Bayes pair"))),
    }
}

/// Infimum of the Bayes loss over the loss domain, for the validity check.
fn bayes_loss_infimum(functional: &RiskFunctional, z: f64) -> Result<f64> {
    match functional.kind {
        FunctionalKind::EsVar => {
            let lo = functional.support_bound().map_or(f64::NEG_INFINITY, |m| -m);
            if lo <= z {
                Ok(z)
            } else {
                bayes_loss(functional, lo, z)
            }
        }
        _ => {
            let x = match functional.support_bound() {
                Some(m) => z.clamp(-m, m),
                None => z,
            };
            bayes_loss(functional, x, z)
        }
    }
}

/// `E = 1 + h (S(x, z) - r)`.
///
/// Fails when `1 + h (inf_x S(x, z) - r) < 0`, i.e. when the weight is too
/// large for `E` to stay nonnegative on the declared loss domain.
pub fn bayes_estat(functional: &RiskFunctional, x: f64, r: f64, z: f64, h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::domain(format!("weight h must be nonnegative, got {h}")));
    }
    if let Some(m) = functional.support_bound() {
        super::check_loss_bound(x, m)?;
    }
    let floor = 1.0 + h * (bayes_loss_infimum(functional, z)? - r);
    if floor < -1e-12 {
        return Err(Error::domain(format!(
            "weight {h} lets the e-statistic reach {floor} < 0 at forecast ({r}, {z})"
        )));
    }
    Ok(1.0 + h * (bayes_loss(functional, x, z)? - r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn es_var_reduces_to_identification_evalue() {
        let f = RiskFunctional::es_var(0.9).unwrap();
        let (r, z) = (2.5, 1.5);
        for x in [-3.0, 0.0, 1.5, 2.0, 7.0] {
            let e = bayes_estat(&f, x, r, z, 1.0 / (r - z)).unwrap();
            assert_relative_eq!(e, pos(x - z) / ((1.0 - 0.9) * (r - z)), epsilon = 1e-12);
        }
    }

    #[test]
    fn mean_variance_example() {
        let f = RiskFunctional::mean_variance();
        assert_relative_eq!(bayes_estat(&f, 3.0, 2.0, 1.0, 0.5).unwrap(), 2.0);
    }

    #[test]
    fn unit_when_loss_equals_forecast() {
        let f = RiskFunctional::expectile_variantile(0.8).unwrap();
        let s = bayes_loss(&f, 2.0, 0.5).unwrap();
        assert_relative_eq!(bayes_estat(&f, 2.0, s, 0.5, 0.3).unwrap(), 1.0);
    }

    #[test]
    fn rejects_oversized_weight() {
        let f = RiskFunctional::es_var(0.9).unwrap();
        assert!(bayes_estat(&f, 0.0, 2.5, 1.5, 2.0).is_err());
        assert!(bayes_estat(&RiskFunctional::mean(), 0.0, 1.0, 0.0, 1.0).is_err());
    }
}
