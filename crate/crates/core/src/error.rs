use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("derivative of order {order} undefined at r = {r}")]
    DerivativeUndefined { r: f64, order: usize },

    #[error("degenerate point r = {r}: {what}")]
    DegeneratePoint { r: f64, what: &'static str },

    #[error("{what} must be positive, got {value} at r = {r}")]
    NonPositive {
        what: &'static str,
        r: f64,
        value: f64,
    },

    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (value {value:e}, error estimate {err_est:e})"
    )]
    NonConvergence {
        value: f64,
        err_est: f64,
        subdivisions: usize,
    },

    #[error("divergent tail: density decays like r^-{exponent}")]
    DivergentTail { exponent: f64 },

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("schedule undefined for deficit {0} (needs 0 < deficit < 1)")]
    ScheduleUndefined(f64),

    #[error("field does not decay: {0}")]
    NonDecaying(String),

    #[error("cross-check failed: {what} ({lhs:e} vs {rhs:e})")]
    CrossCheck {
        what: &'static str,
        lhs: f64,
        rhs: f64,
    },

    #[error("grid import: {0}")]
    Grid(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<LabError>,
    },
}

impl LabError {
    pub fn in_stage(self, stage: &'static str) -> LabError {
        LabError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
