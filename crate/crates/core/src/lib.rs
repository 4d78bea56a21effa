pub mod dtmc;
pub mod estimators;
pub mod interval;
pub mod monitor;
pub mod paramcheck;
pub mod rational;
pub mod ratfunc;
pub mod shell;
pub mod simulator;
