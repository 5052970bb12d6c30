//! The three model systems: an FPU chain, a geometrically exact string and a
//! Föppl–von Kármán plate, each with its natural split and, for the string
//! and plate, the implicit schemes they are usually run with.

pub mod fpu;
pub mod plate;
pub mod string;
