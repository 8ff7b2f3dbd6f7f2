//! Numerical companion to a counterexample for boundary relative extremal
//! functions on a smoothly bounded Hartogs domain in C^2.
//!
//! * [`hartogs_domain`] builds the domain from smooth radial profiles and
//!   certifies every profile constraint.
//! * [`psh_construction`] implements the branch of `arg w`, the piecewise
//!   plurisubharmonic function `f`, the witness `g = (f - 110) / 110`, and
//!   numerical plurisubharmonicity tests.
//! * [`envelope_solver`] is a discrete Perron-Bremermann solver on the
//!   z-rotation reduced grid, used to compare the envelope on the domain with
//!   the envelope on its `delta`-neighbourhood.
//! * [`verify_cli`] ties everything into a reproducible pipeline.

pub mod envelope_solver;
pub mod hartogs_domain;
pub mod psh_construction;
pub mod verify_cli;
