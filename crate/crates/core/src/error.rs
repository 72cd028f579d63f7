use thiserror::Error;

/// Errors raised by filters, observers and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: requires {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("non-finite input {value} poisoned the filter; reset it before further use")]
    NonFinite { value: f64 },

    #[error("filter is poisoned by an earlier non-finite input")]
    Poisoned,

    #[error("frequency {omega} rad/s is at or above the Nyquist limit {nyquist} rad/s")]
    AboveNyquist { omega: f64, nyquist: f64 },

    #[error(
        "delay design requires 2*pi*g*gamma > omega0, but 2*pi*g*gamma = {bound} and omega0 = {omega0}"
    )]
    NonPositiveDelay { bound: f64, omega0: f64 },

    #[error("delay line holds {capacity} samples but a delay of {delay} was requested")]
    DelayExceedsCapacity { capacity: usize, delay: usize },

    #[error("analysis window is empty")]
    EmptyWindow,

    #[error("window [{start}, {end}) s does not fit a trace of {len} samples")]
    WindowOutOfRange { start: f64, end: f64, len: usize },

    #[error("length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("initial frequency {initial} rad/s lies outside the bounds [{min}, {max}] rad/s")]
    InitialFrequencyOutOfBounds { initial: f64, min: f64, max: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require(
    ok: bool,
    name: &'static str,
    value: f64,
    constraint: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            constraint,
        })
    }
}
