//! Parser fuzzing, random well-typed expressions against a tree-walking
//! reference evaluator, and Null absorption of strict operators.

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tidewatch::expression::{self, infer, Bindings, Program, TypeEnv};
use tidewatch::model::{StreamElement, Timestamp, Value, ValueType};

use crate::support::{Failures, Outcome};

const FUZZ_INPUTS: usize = 10_000;
const TYPED_EXPRESSIONS: usize = 1_000;
const ROWS_PER_EXPRESSION: usize = 8;
const ABSORPTION_TRIALS: usize = 2_000;

// ---- test-side expression model ----

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Num,
    Bool,
    Text,
}

#[derive(Debug, Clone)]
enum E {
    Int(i64),
    Float(f64),
    Str(&'static str),
    Bool(bool),
    Field(&'static str),
    Neg(Box<E>),
    Not(Box<E>),
    Bin(&'static str, Box<E>, Box<E>),
    Call(&'static str, Vec<E>),
}

/// Columns of the random rows and their kinds.
const NUM_FIELDS: [&str; 3] = ["i", "x", "big"];
const TEXTS: [&str; 5] = ["", "a", "ab", "Z01", "日本"];

fn render(e: &E) -> String {
    match e {
        E::Int(i) => i.to_string(),
        E::Float(x) => format!("{x:.2}"),
        E::Str(s) => format!("'{s}'"),
        E::Bool(b) => b.to_string(),
        E::Field(f) => f.to_string(),
        E::Neg(a) => format!("(-{})", render(a)),
        E::Not(a) => format!("(not {})", render(a)),
        E::Bin(op, a, b) => format!("({} {op} {})", render(a), render(b)),
        E::Call(f, args) => format!("{f}({})", args.iter().map(render).collect::<Vec<_>>().join(", ")),
    }
}

fn contains_field(e: &E) -> bool {
    match e {
        E::Field(_) => true,
        E::Neg(a) | E::Not(a) => contains_field(a),
        E::Bin(_, a, b) => contains_field(a) || contains_field(b),
        E::Call(_, args) => args.iter().any(contains_field),
        _ => false,
    }
}

fn fields(e: &E, out: &mut Vec<&'static str>) {
    match e {
        E::Field(f) => out.push(f),
        E::Neg(a) | E::Not(a) => fields(a, out),
        E::Bin(_, a, b) => {
            fields(a, out);
            fields(b, out);
        }
        E::Call(_, args) => args.iter().for_each(|a| fields(a, out)),
        _ => {}
    }
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    /// Only Null-absorbing operators.
    strict: bool,
}

impl Gen<'_> {
    fn pick<T: Copy>(&mut self, xs: &[T]) -> T {
        xs[self.rng.random_range(0..xs.len())]
    }

    fn num(&mut self, depth: u32) -> E {
        if depth == 0 || self.rng.random_bool(0.3) {
            return match self.rng.random_range(0..4) {
                0 => E::Int(self.rng.random_range(0..=20)),
                1 => E::Float(f64::from(self.rng.random_range(0..=80)) / 4.0),
                _ => E::Field(self.pick(&NUM_FIELDS)),
            };
        }
        match self.rng.random_range(0..10) {
            0 => E::Neg(Box::new(self.num(depth - 1))),
            1..=5 => {
                let op = self.pick(&["+", "-", "*", "/"]);
                E::Bin(op, Box::new(self.num(depth - 1)), Box::new(self.num(depth - 1)))
            }
            6 => E::Call("abs", vec![self.num(depth - 1)]),
            7 | 8 => {
                let f = self.pick(&["min", "max"]);
                E::Call(f, vec![self.num(depth - 1), self.num(depth - 1)])
            }
            _ => E::Call("length", vec![self.text()]),
        }
    }

    fn text(&mut self) -> E {
        if self.rng.random_bool(0.6) {
            E::Field("s")
        } else {
            E::Str(self.pick(&TEXTS))
        }
    }

    fn boolean(&mut self, depth: u32) -> E {
        let comparison = |g: &mut Self| {
            let op = g.pick(&["<", "<=", "=", "!=", ">=", ">"]);
            E::Bin(
                op,
                Box::new(g.num(depth.saturating_sub(1))),
                Box::new(g.num(depth.saturating_sub(1))),
            )
        };
        if self.strict {
            return comparison(self);
        }
        if depth == 0 {
            return match self.rng.random_range(0..4) {
                0 => E::Bool(self.rng.random_bool(0.5)),
                1 => E::Field("b"),
                2 => E::Call("is_null", vec![E::Field(self.pick(&["i", "x", "s", "b"]))]),
                _ => E::Call("non_empty", vec![self.text()]),
            };
        }
        match self.rng.random_range(0..10) {
            0 => E::Not(Box::new(self.boolean(depth - 1))),
            1 | 2 => {
                let op = self.pick(&["and", "or"]);
                E::Bin(op, Box::new(self.boolean(depth - 1)), Box::new(self.boolean(depth - 1)))
            }
            3..=5 => comparison(self),
            6 => {
                let op = self.pick(&["=", "!="]);
                E::Bin(op, Box::new(self.text()), Box::new(self.text()))
            }
            7 => E::Call("positive", vec![self.num(depth - 1)]),
            8 => E::Call("coords_valid", vec![self.num(depth - 1), self.num(depth - 1)]),
            _ => self.boolean(0),
        }
    }
}

// ---- reference evaluator ----

#[derive(Debug, Clone, PartialEq)]
enum R {
    Null,
    I(i64),
    F(f64),
    B(bool),
    T(String),
}

fn float(x: f64) -> R {
    if x.is_finite() {
        R::F(x)
    } else {
        R::Null
    }
}

fn as_f(r: &R) -> Option<f64> {
    match r {
        R::I(i) => Some(*i as f64),
        R::F(x) => Some(*x),
        _ => None,
    }
}

fn order(a: &R, b: &R) -> Option<std::cmp::Ordering> {
    match (a, b) {
        (R::I(x), R::I(y)) => Some(x.cmp(y)),
        _ => as_f(a)?.partial_cmp(&as_f(b)?),
    }
}

fn lookup(row: &BTreeMap<&str, R>, f: &str) -> R {
    row.get(f).cloned().unwrap_or(R::Null)
}

fn eval(e: &E, row: &BTreeMap<&str, R>) -> R {
    use std::cmp::Ordering::*;
    match e {
        E::Int(i) => R::I(*i),
        E::Float(x) => R::F(*x),
        E::Str(s) => R::T(s.to_string()),
        E::Bool(b) => R::B(*b),
        E::Field(f) => lookup(row, f),
        E::Neg(a) => match eval(a, row) {
            R::I(i) => i.checked_neg().map_or(R::Null, R::I),
            R::F(x) => float(-x),
            _ => R::Null,
        },
        E::Not(a) => match eval(a, row) {
            R::B(b) => R::B(!b),
            _ => R::Null,
        },
        E::Bin(op, a, b) => {
            let (l, r) = (eval(a, row), eval(b, row));
            match *op {
                "and" => match (&l, &r) {
                    (R::B(false), _) | (_, R::B(false)) => R::B(false),
                    (R::B(true), R::B(true)) => R::B(true),
                    _ => R::Null,
                },
                "or" => match (&l, &r) {
                    (R::B(true), _) | (_, R::B(true)) => R::B(true),
                    (R::B(false), R::B(false)) => R::B(false),
                    _ => R::Null,
                },
                "+" | "-" | "*" => match (&l, &r) {
                    (R::I(x), R::I(y)) => match *op {
                        "+" => x.checked_add(*y),
                        "-" => x.checked_sub(*y),
                        _ => x.checked_mul(*y),
                    }
                    .map_or(R::Null, R::I),
                    _ => match (as_f(&l), as_f(&r)) {
                        (Some(x), Some(y)) => float(match *op {
                            "+" => x + y,
                            "-" => x - y,
                            _ => x * y,
                        }),
                        _ => R::Null,
                    },
                },
                "/" => match (as_f(&l), as_f(&r)) {
                    (Some(_), Some(0.0)) => R::Null,
                    (Some(x), Some(y)) => float(x / y),
                    _ => R::Null,
                },
                cmp => match (&l, &r) {
                    (R::T(x), R::T(y)) => match cmp {
                        "=" => R::B(x == y),
                        "!=" => R::B(x != y),
                        _ => R::Null,
                    },
                    _ => match order(&l, &r) {
                        None => R::Null,
                        Some(o) => R::B(match cmp {
                            "<" => o == Less,
                            "<=" => o != Greater,
                            "=" => o == Equal,
                            "!=" => o != Equal,
                            ">=" => o != Less,
                            _ => o == Greater,
                        }),
                    },
                },
            }
        }
        E::Call(f, args) => {
            let v: Vec<R> = args.iter().map(|a| eval(a, row)).collect();
            match *f {
                "is_null" => R::B(v[0] == R::Null),
                "non_empty" => R::B(match &v[0] {
                    R::Null => false,
                    R::T(s) => !s.is_empty(),
                    _ => true,
                }),
                _ if v.contains(&R::Null) => R::Null,
                "abs" => match &v[0] {
                    R::I(i) => i.checked_abs().map_or(R::Null, R::I),
                    R::F(x) => R::F(x.abs()),
                    _ => R::Null,
                },
                "length" => match &v[0] {
                    R::T(s) => R::I(s.chars().count() as i64),
                    _ => R::Null,
                },
                "min" | "max" => match order(&v[0], &v[1]) {
                    None => R::Null,
                    Some(Greater) if *f == "min" => v[1].clone(),
                    Some(Less) if *f == "max" => v[1].clone(),
                    Some(_) => v[0].clone(),
                },
                "positive" => as_f(&v[0]).map_or(R::Null, |x| R::B(x > 0.0)),
                "coords_valid" => match (as_f(&v[0]), as_f(&v[1])) {
                    (Some(lat), Some(lon)) => R::B((-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)),
                    _ => R::Null,
                },
                other => panic!("unknown builtin {other}"),
            }
        }
    }
}

fn from_value(v: &Value) -> R {
    match v {
        Value::Null => R::Null,
        Value::Int(i) => R::I(*i),
        Value::Float(x) => R::F(*x),
        Value::Bool(b) => R::B(*b),
        Value::Text(s) => R::T(s.to_string()),
        Value::Timestamp(t) => R::I(t.millis()),
    }
}

fn random_row(rng: &mut ChaCha8Rng) -> BTreeMap<&'static str, R> {
    let mut row = BTreeMap::new();
    let null = |rng: &mut ChaCha8Rng| rng.random_bool(0.15);
    row.insert(
        "i",
        if null(rng) {
            R::Null
        } else {
            R::I(rng.random_range(-1000..=1000))
        },
    );
    row.insert(
        "big",
        if null(rng) {
            R::Null
        } else {
            R::I(rng.random_range(i64::MAX / 4..=i64::MAX) * if rng.random_bool(0.5) { 1 } else { -1 })
        },
    );
    row.insert(
        "x",
        if null(rng) {
            R::Null
        } else {
            R::F(rng.random_range(-500.0..500.0))
        },
    );
    row.insert(
        "s",
        if null(rng) {
            R::Null
        } else {
            R::T(TEXTS[rng.random_range(0..TEXTS.len())].to_string())
        },
    );
    row.insert("b", if null(rng) { R::Null } else { R::B(rng.random_bool(0.5)) });
    row
}

fn element(row: &BTreeMap<&str, R>) -> StreamElement {
    row.iter().fold(StreamElement::new(Timestamp::EPOCH, 1), |e, (k, v)| {
        let value = match v {
            R::Null => Value::Null,
            R::I(i) => Value::Int(*i),
            R::F(x) => Value::Float(*x),
            R::B(b) => Value::Bool(*b),
            R::T(s) => Value::text(s.as_str()),
        };
        e.with(k, value)
    })
}

fn schema() -> BTreeMap<String, ValueType> {
    [
        ("i", ValueType::Int),
        ("big", ValueType::Int),
        ("x", ValueType::Float),
        ("s", ValueType::Text),
        ("b", ValueType::Bool),
    ]
    .into_iter()
    .map(|(k, t)| (k.to_string(), t))
    .collect()
}

fn compile(src: &str) -> Result<Program, String> {
    expression::compile(src).map_err(|e| format!("`{src}` did not parse: {e}"))
}

// ---- the three properties ----

const SOUP: [&str; 44] = [
    "(",
    ")",
    "[",
    "]",
    ",",
    "+",
    "-",
    "*",
    "/",
    "<",
    "<=",
    "<>",
    "=",
    "==",
    "!=",
    ">",
    ">=",
    "and",
    "or",
    "not",
    "true",
    "false",
    "null",
    "x",
    "value",
    "mu_H",
    "ref_base",
    "abs",
    "min",
    "matches",
    "is_null",
    "length",
    "'a'",
    "'",
    "1",
    "1.5",
    "1e",
    "1e309",
    "99999999999999999999",
    "é",
    "日本",
    "!",
    "'[a-'",
    "hour_of",
];

fn fuzz_input(rng: &mut ChaCha8Rng, valid: &[String]) -> String {
    match rng.random_range(0..10) {
        0 | 1 => {
            let bytes: Vec<u8> = (0..rng.random_range(0..64)).map(|_| rng.random()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        }
        2..=4 => (0..rng.random_range(0..24))
            .map(|_| SOUP[rng.random_range(0..SOUP.len())])
            .collect::<Vec<_>>()
            .join(if rng.random_bool(0.5) { " " } else { "" }),
        5 => {
            let n = rng.random_range(1..20_000);
            let (open, close) =
                [("(", ")"), ("not ", ""), ("-", ""), ("abs(", ")"), ("min(1,", ")")][rng.random_range(0..5)];
            let tail = if rng.random_bool(0.5) {
                close.repeat(n)
            } else {
                String::new()
            };
            format!("{}1{tail}", open.repeat(n))
        }
        _ => {
            // Point mutations of a well-formed expression.
            let mut chars: Vec<char> = valid[rng.random_range(0..valid.len())].chars().collect();
            for _ in 0..rng.random_range(1..4) {
                let at = rng.random_range(0..=chars.len());
                let c = ['(', ')', '\'', ',', '-', 'e', '.', ' ', '9', '<'][rng.random_range(0..10)];
                match rng.random_range(0..3) {
                    0 => chars.insert(at, c),
                    1 if at < chars.len() => {
                        chars.remove(at);
                    }
                    _ if at < chars.len() => chars[at] = c,
                    _ => chars.push(c),
                }
            }
            chars.into_iter().collect()
        }
    }
}

fn fuzz(rng: &mut ChaCha8Rng, valid: &[String], failures: &mut Failures) -> (usize, usize) {
    let row = element(&random_row(rng));
    let mut parsed = 0;
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    for _ in 0..FUZZ_INPUTS {
        let src = fuzz_input(rng, valid);
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| match expression::parse(&src) {
            Ok(expr) => {
                let _ = infer(&expr, &TypeEnv::for_rows(schema()));
                Program::compile(&expr).eval(Some(&row), &Bindings::new());
                true
            }
            Err(e) => {
                // Offsets must point into the input.
                assert!(e.to_string().starts_with("at byte "), "error without position: {e}");
                false
            }
        }));
        match outcome {
            Ok(true) => parsed += 1,
            Ok(false) => {}
            Err(_) => failures.push(format!("panic on input {:?}", src.chars().take(80).collect::<String>())),
        }
    }
    panic::set_hook(hook);
    (FUZZ_INPUTS, parsed)
}

fn reference_agreement(rng: &mut ChaCha8Rng, failures: &mut Failures) -> (Vec<String>, usize) {
    let env = TypeEnv::for_rows(schema());
    let mut sources = Vec::with_capacity(TYPED_EXPRESSIONS);
    let mut evaluations = 0;
    for n in 0..TYPED_EXPRESSIONS {
        let depth = rng.random_range(1..=6);
        let mut g = Gen {
            rng: &mut *rng,
            strict: false,
        };
        let (e, kind) = match n % 3 {
            0 => (g.num(depth), Kind::Num),
            1 => (g.boolean(depth), Kind::Bool),
            _ => (g.text(), Kind::Text),
        };
        let src = render(&e);
        let program = match compile(&src) {
            Ok(p) => p,
            Err(msg) => {
                failures.push(msg);
                continue;
            }
        };
        let ty = infer(&expression::parse(&src).unwrap(), &env);
        let typed = matches!(
            (kind, &ty),
            (Kind::Num, Ok(Some(ValueType::Int | ValueType::Float)))
                | (Kind::Bool, Ok(Some(ValueType::Bool)))
                | (Kind::Text, Ok(Some(ValueType::Text)))
        );
        failures.check(typed, || format!("`{src}` typed as {ty:?}, expected {kind:?}"));
        for _ in 0..ROWS_PER_EXPRESSION {
            let row = random_row(rng);
            let want = eval(&e, &row);
            let got = from_value(&program.eval(Some(&element(&row)), &Bindings::new()));
            evaluations += 1;
            failures.check(got == want, || {
                format!("`{src}` on {row:?}: got {got:?}, want {want:?}")
            });
        }
        sources.push(src);
    }
    (sources, evaluations)
}

fn null_absorption(rng: &mut ChaCha8Rng, failures: &mut Failures) -> usize {
    let mut trials = 0;
    while trials < ABSORPTION_TRIALS {
        let depth = rng.random_range(1..=5);
        let mut g = Gen {
            rng: &mut *rng,
            strict: true,
        };
        let e = if g.rng.random_bool(0.5) {
            g.num(depth)
        } else {
            g.boolean(depth)
        };
        if !contains_field(&e) {
            continue;
        }
        let mut names = Vec::new();
        fields(&e, &mut names);
        let mut row = random_row(rng);
        let nulled = names[rng.random_range(0..names.len())];
        row.insert(nulled, R::Null);
        let src = render(&e);
        let got = match compile(&src) {
            Ok(p) => p.eval(Some(&element(&row)), &Bindings::new()),
            Err(msg) => {
                failures.push(msg);
                continue;
            }
        };
        failures.check(got.is_null(), || format!("`{src}` with {nulled} = null gave {got:?}"));
        trials += 1;
    }
    trials
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    let mut failures = Failures::default();
    let (sources, evaluations) = reference_agreement(&mut rng, &mut failures);
    let (fuzzed, parsed) = fuzz(&mut rng, &sources, &mut failures);
    let absorbed = null_absorption(&mut rng, &mut failures);
    failures.outcome(format!(
        "{fuzzed} fuzzed inputs without a panic ({parsed} parsed); {} well-typed expressions agree with the reference on {evaluations} rows; Null absorbed in {absorbed} randomized nullings",
        sources.len()
    ))
}
