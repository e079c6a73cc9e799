use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("negative transition rate {rate:e} from state {from} to state {to}; refine the grid or choose the clamp or upwind rate policy")]
    NegativeRate { from: usize, to: usize, rate: f64 },
    #[error("grid construction failed: {0}")]
    Grid(String),
    #[error("LCP solver did not converge: {0}")]
    LcpFailure(String),
    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },
    #[error("problem too large: {0}")]
    TooLarge(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
