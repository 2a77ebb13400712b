use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zone {
    Green,
    Yellow,
    Orange,
    Red,
}

impl Zone {
    pub fn as_str(self) -> &'static str {
        match self {
            Zone::Green => "green",
            Zone::Yellow => "yellow",
            Zone::Orange => "orange",
            Zone::Red => "red",
        }
    }
}

/// Which forecast weakly dominates the other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dominance {
    InternalWeaklyDominates,
    StandardWeaklyDominates,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneVerdict {
    pub zone: Zone,
    pub sup_minus: f64,
    pub sup_plus: f64,
    pub tau_minus: Option<usize>,
    pub tau_plus: Option<usize>,
    pub dominance_magnitude: Dominance,
    pub dominance_speed: Dominance,
}

/// Three-zone rule: red if only `H-` is rejected, green if only `H+` is,
/// orange if both are and `sup M- > sup M+`, yellow otherwise.
pub fn classify_zone(
    sup_minus: f64,
    sup_plus: f64,
    tau_minus: Option<usize>,
    tau_plus: Option<usize>,
    alpha: f64,
) -> ZoneVerdict {
    let threshold = 1.0 / alpha;
    let rej_minus = sup_minus >= threshold;
    let rej_plus = sup_plus >= threshold;
    let zone = match (rej_minus, rej_plus) {
        (true, false) => Zone::Red,
        (false, true) => Zone::Green,
        (true, true) if sup_minus > sup_plus => Zone::Orange,
        _ => Zone::Yellow,
    };
    let dominance_magnitude = if sup_minus < sup_plus {
        Dominance::InternalWeaklyDominates
    } else if sup_minus > sup_plus {
        Dominance::StandardWeaklyDominates
    } else {
        Dominance::Tie
    };
    let never = usize::MAX;
    let (tm, tp) = (tau_minus.unwrap_or(never), tau_plus.unwrap_or(never));
    let dominance_speed = match tm.cmp(&tp) {
        std::cmp::Ordering::Greater => Dominance::InternalWeaklyDominates,
        std::cmp::Ordering::Less => Dominance::StandardWeaklyDominates,
        std::cmp::Ordering::Equal => Dominance::Tie,
    };
    ZoneVerdict { zone, sup_minus, sup_plus, tau_minus, tau_plus, dominance_magnitude, dominance_speed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(classify_zone(30.0, 1.5, Some(3), None, 0.1).zone, Zone::Red);
        let v = classify_zone(12.0, 40.0, Some(9), Some(4), 0.1);
        assert_eq!(v.zone, Zone::Yellow);
        assert_eq!(v.dominance_magnitude, Dominance::InternalWeaklyDominates);
        assert_eq!(v.dominance_speed, Dominance::InternalWeaklyDominates);
        let v = classify_zone(40.0, 12.0, Some(4), Some(9), 0.1);
        assert_eq!(v.zone, Zone::Orange);
        assert_eq!(v.dominance_magnitude, Dominance::StandardWeaklyDominates);
        assert_eq!(classify_zone(1.0, 11.0, None, Some(2), 0.1).zone, Zone::Green);
        let v = classify_zone(1.0, 1.0, None, None, 0.1);
        assert_eq!(v.zone, Zone::Yellow);
        assert_eq!(v.dominance_magnitude, Dominance::Tie);
        assert_eq!(v.dominance_speed, Dominance::Tie);
        // the threshold itself counts as a rejection
        assert_eq!(classify_zone(10.0, 1.0, Some(1), None, 0.1).zone, Zone::Red);
    }

    proptest! {
        #[test]
        fn zones_are_exhaustive_and_antisymmetric(a in 1.0f64..50.0, b in 1.0f64..50.0, alpha in 0.01f64..0.99) {
            let v = classify_zone(a, b, None, None, alpha);
            let w = classify_zone(b, a, None, None, alpha);
            let th = 1.0 / alpha;
            let expected = match (a >= th, b >= th) {
                (true, false) => Zone::Red,
                (false, true) => Zone::Green,
                (true, true) if a > b => Zone::Orange,
                _ => Zone::Yellow,
            };
            prop_assert_eq!(v.zone, expected);
            let swapped = match v.zone { Zone::Red => Zone::Green, Zone::Green => Zone::Red, z => z };
            if v.zone != Zone::Orange && w.zone != Zone::Orange {
                prop_assert_eq!(w.zone, swapped);
            }
            if v.tau_minus.is_none() {
                prop_assert!(v.dominance_speed != Dominance::StandardWeaklyDominates);
            }
        }
    }
}
