//! Flat binary files: an 8-line text header (a magic line and seven
//! `key value` lines) followed by little-endian `f64` data. Complex arrays are
//! stored as interleaved `(re, im)` pairs.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;

use crate::basis::{BasisIndex, BasisSize, DiscBasis};
use crate::error::{Error, Result};
use crate::estimate::MomentAccumulator;
use crate::invariants::{BinMap, InvariantTensor2D};
use crate::model::{MeasurementConfig, Micrograph};

pub const MICROGRAPH_MAGIC: &str = "MTDROT-MICROGRAPH 1";
pub const BASIS_MAGIC: &str = "MTDROT-BASIS 1";
pub const TENSOR_MAGIC: &str = "MTDROT-TENSOR 1";
pub const BINNED_MAGIC: &str = "MTDROT-BINNED 1";
pub const CHECKPOINT_MAGIC: &str = "MTDROT-CHECKPOINT 1";
pub const IMAGE_MAGIC: &str = "MTDROT-IMAGE 1";

const HEADER_FIELDS: usize = 7;

/// Header fields of a flat file, keyed by name.
#[derive(Debug, Clone)]
pub struct Header {
    path: PathBuf,
    fields: HashMap<String, String>,
}

impl Header {
    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .fields
            .get(key)
            .ok_or_else(|| Error::format(&self.path, format!("header lacks `{key}`")))?;
        raw.parse()
            .map_err(|_| Error::format(&self.path, format!("bad value `{raw}` for `{key}`")))
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_flat(path: &Path, magic: &str, fields: &[(&str, String)], data: &[f64]) -> Result<()> {
    assert!(fields.len() <= HEADER_FIELDS, "too many header fields");
    let tmp = path.with_extension("partial");
    let run = || -> std::io::Result<()> {
        let mut out = BufWriter::new(File::create(&tmp)?);
        writeln!(out, "{magic}")?;
        for (k, v) in fields {
            writeln!(out, "{k} {v}")?;
        }
        for _ in fields.len()..HEADER_FIELDS {
            writeln!(out, "reserved 0")?;
        }
        for x in data {
            out.write_all(&x.to_le_bytes())?;
        }
        out.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    };
    run().map_err(|e| Error::io(path, e))
}

pub fn read_flat(path: &Path, magic: &str) -> Result<(Header, Vec<f64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut input = BufReader::new(file);
    let mut line = String::new();
    let mut next_line = |input: &mut BufReader<File>| -> Result<String> {
        line.clear();
        let read = input.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if read == 0 {
            return Err(Error::format(path, "truncated header"));
        }
        Ok(line.trim_end().to_string())
    };
    let first = next_line(&mut input)?;
    if first != magic {
        return Err(Error::format(path, format!("expected `{magic}`, found `{first}`")));
    }
    let mut fields = HashMap::new();
    for _ in 0..HEADER_FIELDS {
        let entry = next_line(&mut input)?;
        let (k, v) = entry
            .split_once(' ')
            .ok_or_else(|| Error::format(path, format!("bad header line `{entry}`")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::format(path, "data is not a whole number of f64 values"));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let header = Header {
        path: path.to_path_buf(),
        fields,
    };
    Ok((header, data))
}

/// First line of a file, without reading the rest.
pub fn peek_magic(path: &Path) -> Result<String> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .map_err(|e| Error::io(path, e))?;
    Ok(line.trim_end().to_string())
}

fn expect_len(path: &Path, data: &[f64], len: usize) -> Result<()> {
    if data.len() != len {
        return Err(Error::format(
            path,
            format!("expected {len} values, found {}", data.len()),
        ));
    }
    Ok(())
}

fn interleave(values: &[Complex64]) -> Vec<f64> {
    values.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn deinterleave(data: &[f64]) -> Vec<Complex64> {
    data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// Header of a stored measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicrographHeader {
    pub dim: u8,
    pub m: usize,
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    /// Number of planted copies.
    pub count: usize,
}

impl MicrographHeader {
    pub fn of(cfg: &MeasurementConfig) -> Self {
        Self {
            dim: cfg.dim,
            m: cfg.m,
            n: cfg.n,
            sigma: cfg.sigma,
            seed: cfg.seed,
            count: cfg.p,
        }
    }
}

pub fn write_micrograph(path: &Path, header: &MicrographHeader, micrograph: &Micrograph) -> Result<()> {
    let fields = [
        ("dim", header.dim.to_string()),
        ("m", header.m.to_string()),
        ("n", header.n.to_string()),
        ("sigma", header.sigma.to_string()),
        ("seed", header.seed.to_string()),
        ("count", header.count.to_string()),
    ];
    write_flat(path, MICROGRAPH_MAGIC, &fields, &micrograph.pixels)
}

pub fn read_micrograph(path: &Path) -> Result<(MicrographHeader, Micrograph)> {
    let (h, pixels) = read_flat(path, MICROGRAPH_MAGIC)?;
    let header = MicrographHeader {
        dim: h.get("dim")?,
        m: h.get("m")?,
        n: h.get("n")?,
        sigma: h.get("sigma")?,
        seed: h.get("seed")?,
        count: h.get("count")?,
    };
    if header.dim != 1 && header.dim != 2 {
        return Err(Error::format(path, format!("dim {} is not 1 or 2", header.dim)));
    }
    expect_len(path, &pixels, header.m.pow(header.dim as u32))?;
    let micrograph = Micrograph {
        dim: header.dim,
        m: header.m,
        pixels,
    };
    Ok((header, micrograph))
}

/// Cache file name for a basis of the first `d` eigenfunctions at radius `n`.
pub fn basis_cache_path(dir: &Path, n: usize, d: usize) -> PathBuf {
    dir.join(format!("basis_n{n}_d{d}.bin"))
}

/// Stores the root table `(ν, q, λ)` followed by the `Ψ̂` tables.
pub fn write_basis(path: &Path, basis: &DiscBasis, requested: usize) -> Result<()> {
    let fields = [
        ("n", basis.n().to_string()),
        ("bandlimit", basis.bandlimit().to_string()),
        ("d", basis.dim().to_string()),
        ("max_order", basis.max_order().to_string()),
        ("requested", requested.to_string()),
    ];
    let side = basis.side();
    let mut data = Vec::with_capacity(basis.dim() * (3 + 2 * side * side));
    for idx in basis.indices() {
        data.extend([idx.order as f64, idx.radial as f64, idx.root]);
    }
    for i in 0..basis.dim() {
        data.extend(interleave(basis.psi_hat(i)));
    }
    write_flat(path, BASIS_MAGIC, &fields, &data)
}

pub fn read_basis(path: &Path) -> Result<DiscBasis> {
    let (h, data) = read_flat(path, BASIS_MAGIC)?;
    let n: usize = h.get("n")?;
    let d: usize = h.get("d")?;
    let bandlimit: f64 = h.get("bandlimit")?;
    let area = 16 * n * n;
    expect_len(path, &data, d * (3 + 2 * area))?;
    let (roots, tables) = data.split_at(3 * d);
    let indices = roots
        .chunks_exact(3)
        .map(|c| BasisIndex {
            order: c[0] as i32,
            radial: c[1] as u32,
            root: c[2],
        })
        .collect();
    let psi_hat = tables.chunks_exact(2 * area).map(deinterleave).collect();
    DiscBasis::from_cache(n, bandlimit, indices, psi_hat)
}

/// Reads `basis_n{n}_d{d}.bin` from `dir` if present, otherwise builds the
/// basis and stores it there.
pub fn load_or_build_basis(dir: Option<&Path>, n: usize, d: usize) -> Result<DiscBasis> {
    let Some(dir) = dir else {
        return DiscBasis::build(n, BasisSize::Count(d));
    };
    let path = basis_cache_path(dir, n, d);
    if path.exists() {
        return read_basis(&path);
    }
    let basis = DiscBasis::build(n, BasisSize::Count(d))?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_basis(&path, &basis, d)?;
    Ok(basis)
}

/// A full `Ŝ` tensor together with `μ`.
pub fn write_tensor(path: &Path, tensor: &InvariantTensor2D, d: usize, max_order: u32) -> Result<()> {
    let fields = [
        ("n", tensor.n.to_string()),
        ("d", d.to_string()),
        ("max_order", max_order.to_string()),
        ("mu", tensor.mu.to_string()),
    ];
    write_flat(path, TENSOR_MAGIC, &fields, &interleave(&tensor.values))
}

pub fn read_tensor(path: &Path) -> Result<InvariantTensor2D> {
    let (h, data) = read_flat(path, TENSOR_MAGIC)?;
    let n: usize = h.get("n")?;
    expect_len(path, &data, 2 * (4 * n).pow(4))?;
    Ok(InvariantTensor2D {
        n,
        values: deinterleave(&data),
        mu: h.get("mu")?,
    })
}

/// Binned invariants; the bin layout is rebuilt from `(n, b₁, b₂)` on read.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedFile {
    pub n: usize,
    pub d: usize,
    pub max_order: u32,
    pub b1: f64,
    pub b2: f64,
    pub values: Vec<Complex64>,
}

pub fn write_binned(path: &Path, map: &BinMap, values: &[Complex64], d: usize, max_order: u32) -> Result<()> {
    if values.len() != map.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} bins", map.len()),
            actual: format!("{}", values.len()),
        });
    }
    let (b1, b2) = map.densities();
    let fields = [
        ("n", map.n().to_string()),
        ("d", d.to_string()),
        ("max_order", max_order.to_string()),
        ("b1", b1.to_string()),
        ("b2", b2.to_string()),
        ("bins", map.len().to_string()),
    ];
    write_flat(path, BINNED_MAGIC, &fields, &interleave(values))
}

pub fn read_binned(path: &Path) -> Result<BinnedFile> {
    let (h, data) = read_flat(path, BINNED_MAGIC)?;
    let bins: usize = h.get("bins")?;
    expect_len(path, &data, 2 * bins)?;
    Ok(BinnedFile {
        n: h.get("n")?,
        d: h.get("d")?,
        max_order: h.get("max_order")?,
        b1: h.get("b1")?,
        b2: h.get("b2")?,
        values: deinterleave(&data),
    })
}

/// A real image on the wrapped `4n × 4n` grid.
pub fn write_image(path: &Path, n: usize, values: &[f64]) -> Result<()> {
    let side = 4 * n;
    if values.len() != side * side {
        return Err(Error::ShapeMismatch {
            expected: format!("{side} x {side} image"),
            actual: format!("{} values", values.len()),
        });
    }
    let fields = [("n", n.to_string()), ("side", side.to_string())];
    write_flat(path, IMAGE_MAGIC, &fields, values)
}

pub fn read_image(path: &Path) -> Result<(usize, Vec<f64>)> {
    let (h, data) = read_flat(path, IMAGE_MAGIC)?;
    let n: usize = h.get("n")?;
    expect_len(path, &data, 16 * n * n)?;
    Ok((n, data))
}

pub fn write_checkpoint(path: &Path, acc: &MomentAccumulator) -> Result<()> {
    let fields = [
        ("dim", acc.dim.to_string()),
        ("m", acc.m.to_string()),
        ("n", acc.n.to_string()),
        ("count", acc.count.to_string()),
        ("pixel_count", acc.pixel_count.to_string()),
        ("sum_pix", acc.sum_pix.to_string()),
        ("sum_pix2", acc.sum_pix2.to_string()),
    ];
    write_flat(path, CHECKPOINT_MAGIC, &fields, &acc.sum_a)
}

pub fn read_checkpoint(path: &Path) -> Result<MomentAccumulator> {
    let (h, sum_a) = read_flat(path, CHECKPOINT_MAGIC)?;
    let mut acc = MomentAccumulator::empty(h.get("dim")?, h.get("m")?, h.get("n")?)
        .map_err(|e| Error::format(path, e.to_string()))?;
    expect_len(path, &sum_a, acc.sum_a.len())?;
    acc.sum_a = sum_a;
    acc.count = h.get("count")?;
    acc.pixel_count = h.get("pixel_count")?;
    acc.sum_pix = h.get("sum_pix")?;
    acc.sum_pix2 = h.get("sum_pix2")?;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariants::{bin_map, AngularDesign, ForwardModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn micrograph_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let mic = Micrograph {
            dim: 1,
            m: 5,
            pixels: vec![0.1, -2.5, 1e-300, f64::MAX, 3.0],
        };
        let header = MicrographHeader {
            dim: 1,
            m: 5,
            n: 1,
            sigma: 0.1 + 0.2,
            seed: u64::MAX,
            count: 1,
        };
        write_micrograph(&path, &header, &mic).unwrap();
        let (h, back) = read_micrograph(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, mic);
        let bytes = fs::read(&path).unwrap();
        let lines: Vec<&[u8]> = bytes.splitn(9, |&b| b == b'\n').collect();
        assert_eq!(lines[0], MICROGRAPH_MAGIC.as_bytes());
        assert_eq!(lines[6], b"count 1");
        assert_eq!(lines[7], b"reserved 0");
        assert_eq!(lines[8].len(), 5 * 8);
    }

    #[test]
    fn wrong_magic_and_truncation_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        fs::write(&path, "SOMETHING\n").unwrap();
        assert!(matches!(read_micrograph(&path), Err(Error::Format { .. })));
        fs::write(&path, format!("{MICROGRAPH_MAGIC}\ndim 1\n")).unwrap();
        assert!(matches!(read_micrograph(&path), Err(Error::Format { .. })));
        assert!(matches!(
            read_micrograph(&dir.path().join("none")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn basis_and_tensor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let basis = load_or_build_basis(Some(dir.path()), 3, 8).unwrap();
        let cached = load_or_build_basis(Some(dir.path()), 3, 8).unwrap();
        assert_eq!(cached.indices(), basis.indices());
        let v = basis.random_coeffs(&mut ChaCha8Rng::seed_from_u64(1));
        let a = ForwardModel::new(basis.clone(), AngularDesign::nyquist(&basis))
            .forward(&v)
            .unwrap();
        let b = ForwardModel::new(cached.clone(), AngularDesign::nyquist(&cached))
            .forward(&v)
            .unwrap();
        assert_eq!(a, b);

        let path = dir.path().join("s.bin");
        write_tensor(&path, &a, basis.dim(), basis.max_order()).unwrap();
        assert_eq!(read_tensor(&path).unwrap(), a);

        let map = bin_map(3, 1.0, 2.0).unwrap();
        let binned = map.reduce(&a.values).unwrap();
        let path = dir.path().join("b.bin");
        write_binned(&path, &map, &binned, basis.dim(), basis.max_order()).unwrap();
        let back = read_binned(&path).unwrap();
        assert_eq!((back.b1, back.b2, back.values), (1.0, 2.0, binned));
    }
}
