use super::ConstraintType;

/// Running state of the checkpoint rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckpointGateState {
    pub max_acc: f64,
    pub delta: f64,
}

impl CheckpointGateState {
    /// `max_acc = 0`; `δ = −1` for constraints 1 and 2. Balanced mode starts
    /// at `δ = 2`, the largest possible `|sen − spe|`, since `−1` would make
    /// its condition unsatisfiable.
    pub fn new(constraint: ConstraintType) -> Self {
        CheckpointGateState {
            max_acc: 0.0,
            delta: match constraint {
                ConstraintType::Balanced => 2.0,
                _ => -1.0,
            },
        }
    }
}

/// Validation metrics of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateMetrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Decides whether the current epoch is saved and returns the updated state.
/// The state only changes on a save.
pub fn constraint_gate(
    state: &CheckpointGateState,
    m: GateMetrics,
    constraint: ConstraintType,
    threshold: f64,
) -> (bool, CheckpointGateState) {
    let acc_ok = m.accuracy >= state.max_acc;
    let diff = m.sensitivity - m.specificity;
    let delta = state.delta;
    let (save, new_delta) = match constraint {
        ConstraintType::None => (acc_ok, delta),
        ConstraintType::Sensitivity => (acc_ok && diff >= delta, raise(delta, diff, threshold)),
        ConstraintType::Specificity => (acc_ok && -diff >= delta, raise(delta, -diff, threshold)),
        ConstraintType::Balanced => {
            let gap = diff.abs();
            let next = if delta > threshold { gap } else { threshold };
            (acc_ok && gap <= delta, next)
        }
    };
    if !save {
        return (false, *state);
    }
    (
        true,
        CheckpointGateState {
            max_acc: m.accuracy,
            delta: new_delta,
        },
    )
}

fn raise(delta: f64, diff: f64, threshold: f64) -> f64 {
    if delta < threshold {
        diff
    } else {
        threshold
    }
}
