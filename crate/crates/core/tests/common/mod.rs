#![allow(dead_code)]

use delocspec_core::cyclotomic::Cyclotomic;
use delocspec_core::group::{Group, GroupElement};
use delocspec_core::ring::{Coefficient, RingElement, RingMatrix};
use rand::Rng;

pub fn z() -> Group {
    Group::free_abelian(&["u"]).unwrap()
}

pub fn z2z() -> Group {
    Group::direct_product(vec![Group::cyclic(2, "t").unwrap(), z()]).unwrap()
}

pub fn s3() -> Group {
    let perms: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let idx = |p: [usize; 3]| perms.iter().position(|q| *q == p).unwrap() as u32;
    let rows = perms.iter().map(|a| perms.iter().map(|b| idx([a[b[0]], a[b[1]], a[b[2]]])).collect()).collect();
    Group::finite_table(rows, vec![("r".into(), 3), ("s".into(), 1)]).unwrap()
}

/// Finite groups the property suites run over.
pub fn finite_backends() -> Vec<(&'static str, Group)> {
    vec![
        ("Z/7", Group::cyclic(7, "c").unwrap()),
        ("S3", s3()),
        ("Z/2xZ/3", Group::direct_product(vec![Group::cyclic(2, "a").unwrap(), Group::cyclic(3, "b").unwrap()]).unwrap()),
    ]
}

pub fn random_word<R: Rng>(g: &Group, max_len: usize, rng: &mut R) -> GroupElement {
    let len = rng.random_range(0..=max_len);
    let word: Vec<(usize, i64)> = (0..len)
        .map(|_| (rng.random_range(0..g.generators().len()), if rng.random_bool(0.5) { 1 } else { -1 }))
        .collect();
    g.eval_word(&word).unwrap()
}

/// Integer or `ℤ[i]` coefficient in a small box.
pub fn random_coefficient<R: Rng>(rng: &mut R, gaussian: bool) -> Coefficient {
    let re = rng.random_range(-3i64..=3);
    if gaussian {
        let im = rng.random_range(-2i64..=2);
        Coefficient::Exact(&Cyclotomic::from_integer(re) + &(&Cyclotomic::zeta(4, 1) * &Cyclotomic::from_integer(im)))
    } else {
        Coefficient::from(re)
    }
}

pub fn random_element<R: Rng>(g: &Group, terms: usize, radius: usize, gaussian: bool, rng: &mut R) -> RingElement {
    let count = rng.random_range(1..=terms);
    RingElement::from_terms(g, (0..count).map(|_| (random_word(g, radius, rng), random_coefficient(rng, gaussian))))
        .unwrap()
}

pub fn random_matrix<R: Rng>(g: &Group, d: usize, terms: usize, radius: usize, gaussian: bool, rng: &mut R) -> RingMatrix {
    let rows = (0..d).map(|_| (0..d).map(|_| random_element(g, terms, radius, gaussian, rng)).collect()).collect();
    RingMatrix::from_rows(g, rows).unwrap()
}

/// `b*b` for a random `b`.
pub fn random_positive<R: Rng>(g: &Group, d: usize, terms: usize, radius: usize, gaussian: bool, rng: &mut R) -> RingMatrix {
    let b = random_matrix(g, d, terms, radius, gaussian, rng);
    b.adjoint().mul(&b).unwrap()
}
