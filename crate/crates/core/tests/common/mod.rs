#![allow(dead_code)]

use std::cell::RefCell;
use std::rc::Rc;

use qpc_core::RandomSource;

/// Depth-first enumeration of every random branch a session can take.
///
/// Each scripted source replays the current path of choices and extends it
/// with `false` past its end, accumulating the path's probability.
#[derive(Debug, Default)]
pub struct Explorer {
    path: Vec<bool>,
    pos: usize,
    weight: f64,
}

impl Explorer {
    pub fn new() -> Rc<RefCell<Self>> {
        Rc::new(RefCell::new(Self {
            path: Vec::new(),
            pos: 0,
            weight: 1.0,
        }))
    }

    fn take(&mut self, p_true: f64) -> bool {
        let choice = if self.pos < self.path.len() {
            self.path[self.pos]
        } else {
            self.path.push(false);
            false
        };
        self.pos += 1;
        self.weight *= if choice { p_true } else { 1.0 - p_true };
        choice
    }

    pub fn begin(&mut self) {
        self.pos = 0;
        self.weight = 1.0;
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Move to the next unexplored path; `false` once all are done.
    pub fn advance(&mut self) -> bool {
        while self.path.last() == Some(&true) {
            self.path.pop();
        }
        match self.path.last_mut() {
            Some(last) => {
                *last = true;
                true
            }
            None => false,
        }
    }
}

pub struct Scripted(pub Rc<RefCell<Explorer>>);

impl RandomSource for Scripted {
    fn next_u64(&mut self) -> u64 {
        panic!("protocol code must draw through next_bit/bernoulli");
    }

    fn next_bit(&mut self) -> u8 {
        self.0.borrow_mut().take(0.5) as u8
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        self.0.borrow_mut().take(p)
    }
}

/// Enumerate all branches of `run`, returning (total probability, probability
/// that `run` reported success, number of branches).
pub fn enumerate<F>(mut run: F) -> (f64, f64, usize)
where
    F: FnMut(Box<dyn RandomSource>, Box<dyn RandomSource>) -> bool,
{
    let ex = Explorer::new();
    let mut total = 0.0;
    let mut success = 0.0;
    let mut branches = 0;
    loop {
        ex.borrow_mut().begin();
        let ok = run(Box::new(Scripted(ex.clone())), Box::new(Scripted(ex.clone())));
        let w = ex.borrow().weight();
        total += w;
        if ok {
            success += w;
        }
        branches += 1;
        if !ex.borrow_mut().advance() {
            break;
        }
    }
    (total, success, branches)
}
