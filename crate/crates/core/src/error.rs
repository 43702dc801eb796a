use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed coefficient field: {0}")]
    MalformedField(String),
    #[error("insufficient sample grid: {0}")]
    InsufficientGrid(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("step size {dt} exceeds stability bound {bound}")]
    Stability { dt: f64, bound: f64 },
    #[error("non-finite value at t = {time}")]
    BlowUp { time: f64 },
    #[error("negative undershoot {value:e} at t = {time}, site {site}")]
    Undershoot { time: f64, site: i64, value: f64 },
    #[error("candidate time step {candidate} is coarser than {required}")]
    Resolution { candidate: f64, required: f64 },
    #[error("no convergence after {} iterations (last delta {:e})", .history.len(), .history.last().copied().unwrap_or(f64::NAN))]
    Convergence { history: Vec<f64> },
    #[error("power iteration stagnated (second/first eigenvalue ratio ~ {gap})")]
    Spectral { gap: f64 },
    #[error("no minimizing bracket found on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64, scan: Vec<(f64, f64)> },
    #[error("grid scan minimum {grid} disagrees with refined minimum {refined}")]
    CrossCheck { refined: f64, grid: f64 },
    #[error("no admissible auxiliary tilt: {0}")]
    Margin(String),
    #[error("inadmissible tilt: mu' c - lambda(mu') = {0} is not positive")]
    InadmissibleTilt(f64),
    #[error("no plateau geometry found (b scanned down to {b_min:e})")]
    Geometry { b_min: f64 },
    #[error("monotone iteration violated by {violation:e} at iterate {iterate}")]
    IterationIntegrity { iterate: usize, violation: f64 },
    #[error("envelope ordering violated by {violation:e} at t = {time}, site {site}")]
    Envelope { time: f64, site: i64, violation: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("front left the window after t = {last_valid}")]
    WindowExit { last_valid: f64 },
    #[error("auxiliary exponent construction failed: {0}")]
    Construction(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
