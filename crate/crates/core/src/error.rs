use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input outside the domain of a formula (negative time, zero width, NaN...).
    #[error("{name} = {value:e} is outside its domain: {constraint}")]
    Domain {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    /// The wave function vanishes, so its phase and velocity are undefined.
    #[error("wave-function node at x = {x:e} m, t = {t:e} s: phase is undefined")]
    Node { x: f64, t: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "grid [{x_min:e}, {x_max:e}] m is too narrow: boundary density is {boundary_fraction:e} \
         of peak (limit {limit:e}); extend the domain to at least +/-{required_extent:e} m"
    )]
    GridTooNarrow {
        x_min: f64,
        x_max: f64,
        boundary_fraction: f64,
        limit: f64,
        required_extent: f64,
    },

    #[error(
        "CFL stall at t = {t:e} s: max|v| = {max_speed:e} m/s forces dt = {dt:e} s, \
         below the floor {min_dt:e} s (t_final / max_steps)"
    )]
    CflStall {
        t: f64,
        dt: f64,
        min_dt: f64,
        max_speed: f64,
    },

    #[error("boundary leakage {leaked:e} exceeds {limit:e} at t = {t:e} s")]
    Leakage { leaked: f64, limit: f64, t: f64 },

    #[error(
        "trajectories starting at x0 = {x0:e} m crossed before t = {t:e} s \
         (velocity field or tolerance defect)"
    )]
    TrajectoryCrossing { x0: f64, t: f64 },

    #[error("fields do not share one grid and time: {0}")]
    GridMismatch(String),

    /// A failure inside one experiment run, tagged with that run's settings.
    #[error("{context}: {source}")]
    Run {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Domain { .. } | Error::Config(_) | Error::GridTooNarrow { .. } | Error::GridMismatch(_) => true,
            Error::Run { source, .. } => source.is_config(),
            _ => false,
        }
    }

    pub(crate) fn in_run(self, context: impl FnOnce() -> String) -> Self {
        match self {
            e @ Error::Run { .. } => e,
            e => Error::Run {
                context: context(),
                source: Box::new(e),
            },
        }
    }
}
