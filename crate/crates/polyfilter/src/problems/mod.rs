//! Concrete problem families and their synthetic generators: correlation
//! fitting in dual form, matrix completion by singular-value thresholding,
//! and standard-form semidefinite programs.

pub mod completion;
pub mod nce;
pub mod sdp;
