pub mod curves;
pub mod diffeo;
pub mod dynamics;
pub mod geom;
pub mod group_words;
pub mod harness;
pub mod mesh;
pub mod solver;
