//! Loadable bit layouts for the message types.

use std::collections::BTreeMap;

use thiserror::Error;

use super::DATA_BITS;

#[derive(Debug, Error, PartialEq)]
pub enum SchemaError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("type {mestype}: field widths sum to {sum}, expected {DATA_BITS}")]
    Width { mestype: u8, sum: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signedness {
    Unsigned,
    Signed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldDesc {
    pub name: String,
    pub width: usize,
    pub signedness: Signedness,
    pub scale: f64,
    pub unit: String,
    /// Raw code meaning "unavailable".
    pub sentinel: Option<i128>,
}

impl FieldDesc {
    pub fn is_reserved(&self) -> bool {
        self.name == "reserved"
    }

    /// Inclusive code range, sentinel included.
    pub fn code_range(&self) -> (i128, i128) {
        // Wider fields are reserved padding and always zero.
        let w = self.width.min(126);
        match self.signedness {
            Signedness::Unsigned => (0, (1i128 << w) - 1),
            Signedness::Signed => (-(1i128 << (w - 1)), (1i128 << (w - 1)) - 1),
        }
    }

    /// Scaled value, `None` for the sentinel.
    pub fn physical(&self, code: i128) -> Option<f64> {
        if Some(code) == self.sentinel {
            None
        } else {
            Some(code as f64 * self.scale)
        }
    }

    /// Nearest code for `value`; `None` when out of range or colliding with
    /// the sentinel.
    pub fn code_for(&self, value: f64) -> Option<i128> {
        let c = (value / self.scale).round();
        let (lo, hi) = self.code_range();
        if !c.is_finite() || c < lo as f64 || c > hi as f64 {
            return None;
        }
        let c = c as i128;
        (Some(c) != self.sentinel).then_some(c)
    }

    fn to_text(&self) -> String {
        let s = match self.signedness {
            Signedness::Unsigned => "unsigned",
            Signedness::Signed => "signed",
        };
        let mut t = format!("{} {} {} {} {}", self.name, self.width, s, self.scale, self.unit);
        if let Some(c) = self.sentinel {
            t.push_str(&format!(" sentinel={c}"));
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TypeLayout {
    pub mestype: u8,
    /// Fields before the record block.
    pub head: Vec<FieldDesc>,
    /// Record layout and repeat count.
    pub record: Option<(Vec<FieldDesc>, usize)>,
    /// Fields after the record block.
    pub tail: Vec<FieldDesc>,
}

impl TypeLayout {
    pub fn width(&self) -> usize {
        let w = |f: &[FieldDesc]| f.iter().map(|d| d.width).sum::<usize>();
        w(&self.head) + self.record.as_ref().map_or(0, |(r, n)| w(r) * n) + w(&self.tail)
    }

    pub fn capacity(&self) -> usize {
        self.record.as_ref().map_or(0, |r| r.1)
    }

    /// Header or trailer field by name.
    pub fn field(&self, name: &str) -> Option<&FieldDesc> {
        self.head.iter().chain(&self.tail).find(|d| d.name == name)
    }

    pub fn record_field(&self, name: &str) -> Option<&FieldDesc> {
        self.record.as_ref()?.0.iter().find(|d| d.name == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MessageSchema {
    layouts: BTreeMap<u8, TypeLayout>,
    /// Signal mode ids accepted in code-bias records; empty means any.
    pub bias_modes: Vec<u8>,
}

/// Text of the shipped default (non-ICD) schema.
pub const DEFAULT_SCHEMA: &str = include_str!("../../data/default_schema.txt");

impl Default for MessageSchema {
    fn default() -> Self {
        MessageSchema::parse(DEFAULT_SCHEMA).expect("shipped schema is valid")
    }
}

fn parse_field(tokens: &[&str], line: usize) -> Result<FieldDesc, SchemaError> {
    let err = |msg: String| SchemaError::Parse { line, msg };
    if !(5..=6).contains(&tokens.len()) {
        return Err(err("expected `name width signed|unsigned scale unit [sentinel=<code>]`".into()));
    }
    let name = tokens[0].to_string();
    let width: usize = tokens[1].parse().map_err(|e| err(format!("width: {e}")))?;
    let signedness = match tokens[2] {
        "signed" => Signedness::Signed,
        "unsigned" => Signedness::Unsigned,
        other => return Err(err(format!("expected signed or unsigned, got `{other}`"))),
    };
    let scale: f64 = tokens[3].parse().map_err(|e| err(format!("scale: {e}")))?;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(err("scale must be positive".into()));
    }
    let sentinel = match tokens.get(5) {
        None => None,
        Some(t) => {
            let v = t.strip_prefix("sentinel=").ok_or_else(|| err(format!("unexpected token `{t}`")))?;
            Some(v.parse::<i128>().map_err(|e| err(format!("sentinel: {e}")))?)
        }
    };
    let d = FieldDesc { name, width, signedness, scale, unit: tokens[4].to_string(), sentinel };
    if width == 0 {
        return Err(err("zero width".into()));
    }
    if !d.is_reserved() && (width > 64 || (signedness == Signedness::Signed && width < 2)) {
        return Err(err(format!("unsupported width {width} for `{}`", d.name)));
    }
    if let Some(c) = sentinel {
        let (lo, hi) = d.code_range();
        if c < lo || c > hi {
            return Err(err(format!("sentinel {c} outside {lo}..={hi}")));
        }
    }
    Ok(d)
}

impl MessageSchema {
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let mut layouts = BTreeMap::new();
        let mut bias_modes = Vec::new();
        let mut cur: Option<TypeLayout> = None;
        let mut in_repeat: Option<(Vec<FieldDesc>, usize)> = None;
        let finish = |l: TypeLayout, layouts: &mut BTreeMap<u8, TypeLayout>| -> Result<(), SchemaError> {
            let sum = l.width();
            if sum != DATA_BITS {
                return Err(SchemaError::Width { mestype: l.mestype, sum });
            }
            layouts.insert(l.mestype, l);
            Ok(())
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| SchemaError::Parse { line, msg };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = content.split_whitespace().collect();
            match tokens[0] {
                "modes" => {
                    let list = tokens.get(1).ok_or_else(|| err("missing mode list".into()))?;
                    bias_modes = list
                        .split(',')
                        .map(|m| m.trim().parse::<u8>().map_err(|e| err(format!("mode: {e}"))))
                        .collect::<Result<_, _>>()?;
                }
                "type" => {
                    if in_repeat.is_some() {
                        return Err(err("`type` inside repeat block".into()));
                    }
                    if let Some(l) = cur.take() {
                        finish(l, &mut layouts)?;
                    }
                    let t: u8 = tokens
                        .get(1)
                        .ok_or_else(|| err("missing type number".into()))?
                        .parse()
                        .map_err(|e| err(format!("type: {e}")))?;
                    if !(1..=62).contains(&t) {
                        return Err(err(format!("type {t} out of range")));
                    }
                    if layouts.contains_key(&t) {
                        return Err(err(format!("type {t} defined twice")));
                    }
                    cur = Some(TypeLayout { mestype: t, head: vec![], record: None, tail: vec![] });
                }
                "repeat" => {
                    let l = cur.as_ref().ok_or_else(|| err("`repeat` outside a type".into()))?;
                    if in_repeat.is_some() || l.record.is_some() {
                        return Err(err("only one repeat block per type".into()));
                    }
                    let n: usize = tokens
                        .get(1)
                        .ok_or_else(|| err("missing repeat count".into()))?
                        .parse()
                        .map_err(|e| err(format!("repeat: {e}")))?;
                    if n == 0 {
                        return Err(err("repeat count must be positive".into()));
                    }
                    in_repeat = Some((Vec::new(), n));
                }
                "end" => {
                    let (fields, n) = in_repeat.take().ok_or_else(|| err("`end` without `repeat`".into()))?;
                    if fields.is_empty() {
                        return Err(err("empty repeat block".into()));
                    }
                    cur.as_mut().expect("repeat implies type").record = Some((fields, n));
                }
                _ => {
                    let f = parse_field(&tokens, line)?;
                    let l = cur.as_mut().ok_or_else(|| err("field outside a type".into()))?;
                    match in_repeat.as_mut() {
                        Some((fields, _)) => fields.push(f),
                        None if l.record.is_some() => l.tail.push(f),
                        None => l.head.push(f),
                    }
                }
            }
        }
        if in_repeat.is_some() {
            return Err(SchemaError::Parse { line: text.lines().count(), msg: "unterminated repeat".into() });
        }
        if let Some(l) = cur.take() {
            finish(l, &mut layouts)?;
        }
        Ok(MessageSchema { layouts, bias_modes })
    }

    pub fn layout(&self, mestype: u8) -> Option<&TypeLayout> {
        self.layouts.get(&mestype)
    }

    pub fn types(&self) -> impl Iterator<Item = u8> + '_ {
        self.layouts.keys().copied()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.bias_modes.is_empty() {
            let m: Vec<String> = self.bias_modes.iter().map(u8::to_string).collect();
            out.push_str(&format!("modes {}\n", m.join(",")));
        }
        for l in self.layouts.values() {
            out.push_str(&format!("\ntype {}\n", l.mestype));
            for f in &l.head {
                out.push_str(&f.to_text());
                out.push('\n');
            }
            if let Some((fields, n)) = &l.record {
                out.push_str(&format!("repeat {n}\n"));
                for f in fields {
                    out.push_str(&f.to_text());
                    out.push('\n');
                }
                out.push_str("end\n");
            }
            for f in &l.tail {
                out.push_str(&f.to_text());
                out.push('\n');
            }
        }
        out
    }
}

/// Field values of one message, in raw codes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawFields {
    pub fields: BTreeMap<String, i128>,
    pub records: Vec<BTreeMap<String, i128>>,
}

pub(crate) fn read_code(bits: &[u8], pos: &mut usize, d: &FieldDesc) -> i128 {
    let s = &bits[*pos..*pos + d.width];
    *pos += d.width;
    if d.is_reserved() {
        return 0;
    }
    let u = s.iter().fold(0u128, |a, &b| a << 1 | (b & 1) as u128);
    match d.signedness {
        Signedness::Unsigned => u as i128,
        Signedness::Signed => {
            let sign = 1u128 << (d.width - 1);
            if u & sign != 0 {
                u as i128 - (1i128 << d.width)
            } else {
                u as i128
            }
        }
    }
}

fn write_code(out: &mut Vec<u8>, d: &FieldDesc, code: i128) {
    let u = if code < 0 { (code + (1i128 << d.width)) as u128 } else { code as u128 };
    for i in (0..d.width).rev() {
        out.push(if i < 128 { (u >> i & 1) as u8 } else { 0 });
    }
}

impl TypeLayout {
    /// Splits `DATA_BITS` payload bits into codes.
    pub fn decode(&self, payload: &[u8]) -> RawFields {
        debug_assert_eq!(payload.len(), DATA_BITS);
        let mut pos = 0;
        let mut raw = RawFields::default();
        for d in &self.head {
            let c = read_code(payload, &mut pos, d);
            if !d.is_reserved() {
                raw.fields.insert(d.name.clone(), c);
            }
        }
        if let Some((fields, n)) = &self.record {
            for _ in 0..*n {
                let mut r = BTreeMap::new();
                for d in fields {
                    let c = read_code(payload, &mut pos, d);
                    if !d.is_reserved() {
                        r.insert(d.name.clone(), c);
                    }
                }
                raw.records.push(r);
            }
        }
        for d in &self.tail {
            let c = read_code(payload, &mut pos, d);
            if !d.is_reserved() {
                raw.fields.insert(d.name.clone(), c);
            }
        }
        raw
    }

    /// Inverse of `decode`. Missing fields and records are zero; codes
    /// must already be in range.
    pub fn encode(&self, raw: &RawFields) -> Result<Vec<u8>, String> {
        let mut out = Vec::with_capacity(DATA_BITS);
        let put = |out: &mut Vec<u8>, d: &FieldDesc, src: Option<&BTreeMap<String, i128>>| {
            let c = if d.is_reserved() { 0 } else { src.and_then(|m| m.get(&d.name)).copied().unwrap_or(0) };
            let (lo, hi) = d.code_range();
            if c < lo || c > hi {
                return Err(format!("{} code {c} outside {lo}..={hi}", d.name));
            }
            write_code(out, d, c);
            Ok(())
        };
        for d in &self.head {
            put(&mut out, d, Some(&raw.fields))?;
        }
        if let Some((fields, n)) = &self.record {
            if raw.records.len() > *n {
                return Err(format!("{} records exceed capacity {n}", raw.records.len()));
            }
            for k in 0..*n {
                for d in fields {
                    put(&mut out, d, raw.records.get(k))?;
                }
            }
        }
        for d in &self.tail {
            put(&mut out, d, Some(&raw.fields))?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_schema_widths() {
        let s = MessageSchema::default();
        assert_eq!(s.types().collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        for t in 1..=4 {
            assert_eq!(s.layout(t).unwrap().width(), DATA_BITS);
        }
        assert_eq!(s.layout(2).unwrap().capacity(), 6);
        assert_eq!(s.layout(3).unwrap().capacity(), 17);
        assert_eq!(s.layout(4).unwrap().capacity(), 15);
        assert_eq!(s.bias_modes, vec![0, 1, 2, 4, 5, 7, 8, 12]);
        assert_eq!(MessageSchema::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn rejects_bad_schemas() {
        let short = "type 1\nepoch 17 unsigned 1 s\n";
        assert_eq!(MessageSchema::parse(short), Err(SchemaError::Width { mestype: 1, sum: 17 }));
        let wide = "type 1\nmask 65 unsigned 1 -\nreserved 391 unsigned 1 -\n";
        assert!(matches!(MessageSchema::parse(wide), Err(SchemaError::Parse { line: 2, .. })));
        let sentinel = "type 1\nx 4 signed 1 m sentinel=-9\nreserved 452 unsigned 1 -\n";
        assert!(matches!(MessageSchema::parse(sentinel), Err(SchemaError::Parse { line: 2, .. })));
        assert!(matches!(MessageSchema::parse("epoch 17 unsigned 1 s"), Err(SchemaError::Parse { line: 1, .. })));
        assert!(matches!(MessageSchema::parse("type 1\nrepeat 2\nx 1 unsigned 1 -\n"), Err(SchemaError::Parse { .. })));
        assert!(matches!(MessageSchema::parse("type 1\nx 4 maybe 1 m\n"), Err(SchemaError::Parse { line: 2, .. })));
    }

    #[test]
    fn sentinel_and_ranges() {
        let d = parse_field(&["radial", "15", "signed", "0.0016", "m", "sentinel=-16384"], 1).unwrap();
        assert_eq!(d.code_range(), (-16384, 16383));
        assert_eq!(d.physical(-16384), None);
        assert_eq!(d.physical(0), Some(0.0));
        assert_eq!(d.code_for(0.0), Some(0));
        assert_eq!(d.code_for(-16384.0 * 0.0016), None);
        assert_eq!(d.code_for(30.0), None);
        assert_eq!(d.code_for(-16383.0 * 0.0016), Some(-16383));
    }

    proptest! {
        #[test]
        fn raw_round_trip(codes in proptest::collection::vec((0u16..512, 0u8..16, -16384i32..16384), 0..=15),
                          epoch in 0u32..86400, iodp in 0u8..16) {
            let s = MessageSchema::default();
            let l = s.layout(4).unwrap();
            let mut raw = RawFields::default();
            raw.fields.insert("epoch".into(), epoch as i128);
            raw.fields.insert("iod_ssr".into(), 1);
            raw.fields.insert("iodp".into(), iodp as i128);
            for (slot, iod, c0) in &codes {
                let mut r = BTreeMap::new();
                r.insert("sat_slot".to_string(), *slot as i128);
                r.insert("iod".to_string(), *iod as i128);
                r.insert("c0".to_string(), *c0 as i128);
                raw.records.push(r);
            }
            let bits = l.encode(&raw).unwrap();
            prop_assert_eq!(bits.len(), DATA_BITS);
            let back = l.decode(&bits);
            prop_assert_eq!(&back.fields, &raw.fields);
            prop_assert_eq!(&back.records[..codes.len()], &raw.records[..]);
            prop_assert!(back.records[codes.len()..].iter().all(|r| r.values().all(|&v| v == 0)));
        }
    }
}
