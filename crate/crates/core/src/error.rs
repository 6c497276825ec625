use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("index out of range: {index}")]
    IndexOutOfRange { index: i64 },

    #[error("site ({n}, {m}) is outside the window")]
    SiteOutOfRange { n: i64, m: i64 },

    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("loop is not invertible at lambda = {lambda}")]
    OutsideGroup { lambda: f64 },

    #[error("truncation residual {residual:e} exceeds tolerance; increase the degree bound")]
    Truncation { residual: f64 },

    #[error("outside big cell: 1 - b*s vanishes (b = {b}, s = {s})")]
    OutsideBigCell { b: f64, s: f64 },

    #[error("outside big cell (numerical): smallest singular value {sigma_min:e}")]
    OutsideBigCellNumerical { sigma_min: f64 },

    #[error("zero potential value at index {index}")]
    ZeroPotential { index: i64 },

    #[error("at site ({n}, {m}): {source}")]
    AtSite {
        n: i64,
        m: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown example `{0}`")]
    UnknownExample(String),
}

impl Error {
    pub(crate) fn at_site(self, n: i64, m: i64) -> Error {
        Error::AtSite {
            n,
            m,
            source: Box::new(self),
        }
    }
}
