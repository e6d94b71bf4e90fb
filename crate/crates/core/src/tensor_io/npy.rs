//! NPY version 1.0 reading and writing for little-endian `f4`/`f8` arrays.
//!
//! Only C-order arrays with one to three axes are supported. The writer emits
//! the same header bytes as numpy's `np.save`, including its spare padding
//! after the dictionary for in-place shape growth.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{IoError, Result};

pub(crate) const MAGIC: [u8; 6] = *b"\x93NUMPY";
const ALIGN: usize = 64;
/// Spare header room numpy reserves so the leading axis can grow in place.
const GROWTH_AXIS_MAX_DIGITS: usize = 21;
const MAX_AXES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An in-memory NPY array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayFile {
    shape: Vec<usize>,
    data: ArrayData,
}

impl ArrayFile {
    pub fn new(shape: Vec<usize>, data: ArrayData) -> Result<Self> {
        if shape.is_empty() || shape.len() > MAX_AXES {
            return Err(IoError::UnsupportedShape(shape));
        }
        let count: usize = shape.iter().product();
        if count != data.len() {
            return Err(IoError::ShapeMismatch {
                shape,
                elements: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn from_f32(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        Self::new(shape, ArrayData::F32(data))
    }

    pub fn dtype(&self) -> Dtype {
        match self.data {
            ArrayData::F32(_) => Dtype::F32,
            ArrayData::F64(_) => Dtype::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    /// Values as `f32`; `f64` payloads are rounded to nearest, ties to even.
    pub fn to_f32(&self) -> Vec<f32> {
        match &self.data {
            ArrayData::F32(v) => v.clone(),
            ArrayData::F64(v) => v.iter().map(|&x| x as f32).collect(),
        }
    }

    pub fn into_f32(self) -> Vec<f32> {
        match self.data {
            ArrayData::F32(v) => v,
            ArrayData::F64(v) => v.into_iter().map(|x| x as f32).collect(),
        }
    }
}

fn header_text(dtype: Dtype, shape: &[usize]) -> String {
    let dims = match shape {
        [n] => format!("({n},)"),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {dims}, }}",
        dtype.descr()
    );
    header.push_str(&" ".repeat(GROWTH_AXIS_MAX_DIGITS.saturating_sub(shape[0].to_string().len())));
    // magic + version + u16 length + header + '\n' must land on ALIGN
    let unpadded = MAGIC.len() + 2 + 2 + header.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    header.push_str(&" ".repeat(pad));
    header.push('\n');
    header
}

pub fn write_npy_to<W: Write>(writer: &mut W, array: &ArrayFile) -> Result<()> {
    let header = header_text(array.dtype(), &array.shape);
    let len =
        u16::try_from(header.len()).map_err(|_| IoError::UnsupportedShape(array.shape.clone()))?;
    writer.write_all(&MAGIC)?;
    writer.write_all(&[1, 0])?;
    writer.write_all(&len.to_le_bytes())?;
    writer.write_all(header.as_bytes())?;
    match &array.data {
        ArrayData::F32(v) => {
            for x in v {
                writer.write_all(&x.to_le_bytes())?;
            }
        }
        ArrayData::F64(v) => {
            for x in v {
                writer.write_all(&x.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn write_npy(path: impl AsRef<Path>, array: &ArrayFile) -> Result<()> {
    let path = path.as_ref();
    let run = || -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_npy_to(&mut w, array)?;
        w.flush()?;
        Ok(())
    };
    run().map_err(|e| e.with_path(path))
}

pub fn read_npy_from<R: Read>(reader: &mut R) -> Result<ArrayFile> {
    let mut preamble = [0u8; 10];
    read_exact_or(reader, &mut preamble, IoError::BadMagic)?;
    if preamble[..6] != MAGIC {
        return Err(IoError::BadMagic);
    }
    if preamble[6..8] != [1, 0] {
        return Err(IoError::UnsupportedVersion(preamble[6], preamble[7]));
    }
    let header_len = u16::from_le_bytes([preamble[8], preamble[9]]) as usize;
    let mut header = vec![0u8; header_len];
    read_exact_or(
        reader,
        &mut header,
        IoError::MalformedHeader("header shorter than declared".into()),
    )?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| IoError::MalformedHeader("header is not ASCII".into()))?;
    let dict = parse_header(header)?;
    if dict.fortran_order {
        return Err(IoError::FortranOrderUnsupported);
    }
    if dict.shape.is_empty() || dict.shape.len() > MAX_AXES {
        return Err(IoError::UnsupportedShape(dict.shape));
    }
    let count = dict
        .shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or_else(|| IoError::MalformedHeader("shape overflows".into()))?;
    let expected = count
        .checked_mul(dict.dtype.size())
        .ok_or_else(|| IoError::MalformedHeader("shape overflows".into()))?;
    let mut payload = Vec::with_capacity(expected);
    reader.take(expected as u64).read_to_end(&mut payload)?;
    if payload.len() != expected {
        return Err(IoError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let data = match dict.dtype {
        Dtype::F32 => ArrayData::F32(
            payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
        ),
        Dtype::F64 => ArrayData::F64(
            payload
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]))
                .collect(),
        ),
    };
    ArrayFile::new(dict.shape, data)
}

pub fn read_npy(path: impl AsRef<Path>) -> Result<ArrayFile> {
    let path = path.as_ref();
    let run = || -> Result<ArrayFile> {
        let mut r = BufReader::new(File::open(path)?);
        read_npy_from(&mut r)
    };
    run().map_err(|e| e.with_path(path))
}

fn read_exact_or<R: Read>(reader: &mut R, buf: &mut [u8], short: IoError) -> Result<()> {
    match reader.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => Err(short),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug)]
struct HeaderDict {
    dtype: Dtype,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Parses the Python dict literal of an NPY header. Accepts any key order and
/// optional trailing commas; rejects unknown keys.
fn parse_header(text: &str) -> Result<HeaderDict> {
    let bad = |msg: &str| IoError::MalformedHeader(format!("{msg} in {text:?}"));
    let mut p = Parser {
        s: text.trim_end().as_bytes(),
        i: 0,
    };
    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;

    p.expect(b'{').ok_or_else(|| bad("expected '{'"))?;
    loop {
        p.skip_ws();
        if p.eat(b'}') {
            break;
        }
        let key = p.string().ok_or_else(|| bad("expected key"))?;
        p.skip_ws();
        p.expect(b':').ok_or_else(|| bad("expected ':'"))?;
        p.skip_ws();
        match key.as_str() {
            "descr" => descr = Some(p.string().ok_or_else(|| bad("descr must be a string"))?),
            "fortran_order" => {
                fortran = Some(
                    p.boolean()
                        .ok_or_else(|| bad("fortran_order must be a bool"))?,
                )
            }
            "shape" => {
                shape = Some(
                    p.tuple()
                        .ok_or_else(|| bad("shape must be a tuple of ints"))?,
                )
            }
            other => return Err(bad(&format!("unknown key '{other}'"))),
        }
        p.skip_ws();
        if !p.eat(b',') {
            p.skip_ws();
            p.expect(b'}').ok_or_else(|| bad("expected ',' or '}'"))?;
            break;
        }
    }
    p.skip_ws();
    if p.i != p.s.len() {
        return Err(bad("trailing characters"));
    }
    if !text.ends_with('\n') {
        return Err(bad("missing terminating newline"));
    }

    let descr = descr.ok_or_else(|| bad("missing descr"))?;
    let dtype = match descr.as_str() {
        "<f4" => Dtype::F32,
        "<f8" => Dtype::F64,
        _ => return Err(IoError::UnsupportedDtype(descr)),
    };
    Ok(HeaderDict {
        dtype,
        fortran_order: fortran.ok_or_else(|| bad("missing fortran_order"))?,
        shape: shape.ok_or_else(|| bad("missing shape"))?,
    })
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.s.get(self.i) == Some(&c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Option<()> {
        self.eat(c).then_some(())
    }

    fn string(&mut self) -> Option<String> {
        let quote = *self.s.get(self.i)?;
        if quote != b'\'' && quote != b'"' {
            return None;
        }
        let start = self.i + 1;
        let len = self.s[start..].iter().position(|&c| c == quote)?;
        self.i = start + len + 1;
        String::from_utf8(self.s[start..start + len].to_vec()).ok()
    }

    fn boolean(&mut self) -> Option<bool> {
        for (word, value) in [(&b"True"[..], true), (&b"False"[..], false)] {
            if self.s[self.i..].starts_with(word) {
                self.i += word.len();
                return Some(value);
            }
        }
        None
    }

    fn tuple(&mut self) -> Option<Vec<usize>> {
        self.expect(b'(')?;
        let mut dims = Vec::new();
        loop {
            self.skip_ws();
            if self.eat(b')') {
                return Some(dims);
            }
            let start = self.i;
            while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                self.i += 1;
            }
            if start == self.i {
                return None;
            }
            dims.push(
                std::str::from_utf8(&self.s[start..self.i])
                    .ok()?
                    .parse()
                    .ok()?,
            );
            self.skip_ws();
            if !self.eat(b',') {
                self.skip_ws();
                self.expect(b')')?;
                return Some(dims);
            }
        }
    }
}
