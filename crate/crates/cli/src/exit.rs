//! Maps failures to the documented exit codes.
//!
//! 1 means the input was unusable (missing files, malformed data, bad
//! arguments), 2 means the input was readable but the signal inside it was
//! degenerate (flat traces, no spectral peak, zero-variance residuals), and
//! 3 means the tool itself failed (numerics blew up during training).

use faintprint::acbnet::NetError;
use faintprint::armodel::ArError;
use faintprint::chromppg::SignalError;
use faintprint::fingerprint::FingerprintError;
use faintprint::pipeline::PipelineError;

pub const INPUT: u8 = 1;
pub const DEGENERATE: u8 = 2;
pub const INTERNAL: u8 = 3;

fn signal_code(err: &SignalError) -> u8 {
    match err {
        SignalError::DegenerateSignal | SignalError::NoPeak => DEGENERATE,
        _ => INPUT,
    }
}

fn fingerprint_code(err: &FingerprintError) -> u8 {
    match err {
        FingerprintError::Signal(s) => signal_code(s),
        _ => INPUT,
    }
}

fn net_code(err: &NetError) -> u8 {
    match err {
        NetError::NonFiniteLoss { .. } => INTERNAL,
        _ => INPUT,
    }
}

fn pipeline_code(err: &PipelineError) -> u8 {
    match err {
        PipelineError::Signal(s) => signal_code(s),
        PipelineError::Fingerprint(f) => fingerprint_code(f),
        PipelineError::Ar(_) => DEGENERATE,
        PipelineError::Net(n) => net_code(n),
        _ => INPUT,
    }
}

/// Walks the error chain and returns the exit code of the most specific
/// recognized cause, defaulting to the input-error code.
pub fn code_for(err: &anyhow::Error) -> u8 {
    // `PipelineError` wraps its causes transparently, so the wrapped error
    // never shows up as a separate link in the chain; match its variants
    // directly.
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return pipeline_code(e);
        }
        if let Some(e) = cause.downcast_ref::<SignalError>() {
            return signal_code(e);
        }
        if let Some(e) = cause.downcast_ref::<FingerprintError>() {
            return fingerprint_code(e);
        }
        if cause.downcast_ref::<ArError>().is_some() {
            return DEGENERATE;
        }
        if let Some(e) = cause.downcast_ref::<NetError>() {
            return net_code(e);
        }
    }
    INPUT
}
