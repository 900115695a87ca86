//! Serde helpers that write big integers as exact JSON numbers.

use std::str::FromStr;

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::arith::Int;

fn number(x: &Int) -> serde_json::Number {
    serde_json::Number::from_str(&x.to_string()).expect("decimal integers are valid JSON numbers")
}

pub fn int<S: Serializer>(x: &Int, s: S) -> Result<S::Ok, S::Error> {
    number(x).serialize(s)
}

pub fn ints<S: Serializer>(xs: &[Int], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&number(x))?;
    }
    seq.end()
}

pub fn int_rows<S: Serializer>(rows: &[Vec<Int>], s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<serde_json::Number>> = rows.iter().map(|r| r.iter().map(number).collect()).collect();
    rows.serialize(s)
}
