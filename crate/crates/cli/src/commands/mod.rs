pub mod bianchi;
pub mod ham;
pub mod lax;
pub mod piii;

use bzpiii::ode::{StepControl, Trajectory};

use crate::config::Overlay;
use crate::CliError;

/// Resolve integrator tolerances from flags/config with the given step cap.
pub fn step_control(
    overlay: &Overlay,
    rtol: Option<f64>,
    atol: Option<f64>,
    h_max: Option<f64>,
    default_h_max: f64,
) -> Result<StepControl, CliError> {
    let rtol = overlay.pick(rtol, "rtol", 1e-10)?;
    let atol = overlay.pick(atol, "atol", 1e-12)?;
    let h_max = overlay.pick(h_max, "h_max", default_h_max)?;
    if rtol <= 0.0 || atol <= 0.0 || h_max <= 0.0 {
        return Err(CliError::Config(
            "tolerances and the step cap must be positive".into(),
        ));
    }
    Ok(StepControl::with_tols(rtol, atol).with_h_max(h_max))
}

/// Glue consecutive trajectories (matching at the seams) into one.
pub fn concat_trajectories(parts: Vec<Trajectory>) -> Trajectory {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut derivs = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        let skip = usize::from(i > 0); // the seam sample is shared
        for ((t, y), d) in part
            .times()
            .iter()
            .zip(part.states())
            .zip(part.derivatives())
            .skip(skip)
        {
            times.push(*t);
            states.push(y.clone());
            derivs.push(d.clone());
        }
    }
    Trajectory::from_samples(times, states, derivs)
}

/// Split [start, end] into decade segments so each can carry a step cap
/// proportional to its own scale; keeps dense-output error uniform for
/// the finite-difference residual probes.
pub fn decade_segments(start: f64, end: f64) -> Vec<(f64, f64)> {
    assert!(start > 0.0 && end > start);
    let mut segments = Vec::new();
    let mut lo = start;
    while lo * 10.0 < end {
        segments.push((lo, lo * 10.0));
        lo *= 10.0;
    }
    segments.push((lo, end));
    segments
}
