pub mod krylov;
pub mod operators;
pub mod saddle;
pub mod sparse;

pub use operators::{BilinearForm, Operators};
pub use saddle::{assemble_saddle, solve_saddle, DofMap, SaddleFactor, SaddleSolution, SaddleSystem, SolverKind, SolverOptions};
pub use sparse::CsrMatrix;
