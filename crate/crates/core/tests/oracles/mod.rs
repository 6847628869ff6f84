//! Reference implementations the library is checked against. They favour
//! obviousness over speed and share no code with the crate under test.
#![allow(dead_code)]

pub mod closure;
pub mod robinson;

pub fn factorial(n: u64) -> u64 {
    (1..=n).product()
}
