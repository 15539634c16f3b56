use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Error kinds shared by every module of the core crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes or component counts disagree.
    Dimension(String),
    /// A non-finite value or an input outside a function's domain.
    Numeric(String),
    /// Invalid model, product or generator parameters.
    Config(String),
    /// A node or row index outside `[0, bound)`.
    Index { index: usize, bound: usize },
    /// The operation refuses to run at this problem size.
    Capability(String),
    /// An API contract was violated by the caller.
    Usage(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(m) => write!(f, "dimension error: {m}"),
            Error::Numeric(m) => write!(f, "numeric error: {m}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::Index { index, bound } => {
                write!(f, "index error: {index} is out of range for {bound} entries")
            }
            Error::Capability(m) => write!(f, "capability error: {m}"),
            Error::Usage(m) => write!(f, "usage error: {m}"),
        }
    }
}

impl core::error::Error for Error {}

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
