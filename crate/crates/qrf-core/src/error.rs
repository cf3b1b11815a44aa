use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QrfError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("support overflow: tail mass {mass:.3e} lies outside the grid")]
    SupportOverflow { mass: f64 },
    #[error("{what} = {value} is not on the grid lattice")]
    OffGrid { what: &'static str, value: f64 },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("label `{0}` does not name a continuous axis")]
    NotContinuous(String),
    #[error("invalid bipartition: {0}")]
    Bipartition(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("wraparound: displacement {displacement:.4} of `{label}` exceeds half-width {half_width:.4}")]
    Wraparound {
        label: String,
        displacement: f64,
        half_width: f64,
    },
    #[error("label mismatch: {0}")]
    LabelMismatch(String),
    #[error("no linear recombination reaches the target form of `{0}`")]
    NoRecombination(String),
    #[error("term mixes position and momentum representations: {0}")]
    RepresentationMixing(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("branch delocalized: mass {mass:.3e} within the breakpoint guard band")]
    Delocalized { mass: f64 },
    #[error("branch centred at {center} straddles a breakpoint")]
    Straddle { center: f64 },
    #[error("branches overlap: |<1|2>| = {0:.3e}")]
    Overlap(f64),
    #[error("dilation factor {0} is not positive")]
    Dilation(f64),
    #[error("unitarity loss {0:.3e} exceeds tolerance")]
    UnitarityLoss(f64),
    #[error("dense dimension {dim} exceeds limit {limit}")]
    DenseOverflow { dim: usize, limit: usize },
    #[error("third-order Trotter bound {0:.3e} exceeds 1e-6")]
    TrotterBound(f64),
    #[error("pointer state is not normalizable")]
    NonNormalizablePointer,
    #[error("mode window off grid: {0}")]
    WindowOffGrid(String),
}

pub type Result<T> = std::result::Result<T, QrfError>;
