pub mod array;
pub mod bench;
pub mod elementary;
pub mod error;
pub mod field;
pub mod lie;
pub mod models;
pub mod oracle;
pub mod real;
pub mod series;
pub mod tape;

pub use array::{CoeffArray, TaylorArray};
pub use elementary::Elementary;
pub use error::{Error, Result};
pub use real::{DoubleDouble, Real};
pub use series::{ElemFn, SubOde, TaylorScalar};
