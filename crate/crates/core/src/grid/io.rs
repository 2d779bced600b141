//! Raw field blocks: little-endian `f64` node values in `(k, j, i)` order
//! plus a sidecar text header `<path>.hdr` with `key = value` lines.

use std::path::{Path, PathBuf};

use super::{ConformalField, GridSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub l: f64,
    pub n: usize,
    pub pole: [f64; 3],
    pub kind: String,
    /// Mass parameter of the far field; defaults to 0.
    pub far_mass: f64,
}

fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

impl FieldHeader {
    pub fn render(&self) -> String {
        format!(
            "L = {:.17e}\nN = {}\no = {:.17e} {:.17e} {:.17e}\nkind = {}\nmass = {:.17e}\n",
            self.l, self.n, self.pole[0], self.pole[1], self.pole[2], self.kind, self.far_mass
        )
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let err = |line: usize, reason: String| Error::Parse {
            source_name: source_name.to_string(),
            line,
            reason,
        };
        let (mut l, mut n, mut pole, mut kind, mut mass) = (None, None, None, None, 0.0);
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| err(no + 1, format!("expected `key = value`, got `{line}`")))?;
            let val = val.trim();
            let num = |v: &str| v.parse::<f64>().map_err(|e| err(no + 1, format!("bad number `{v}`: {e}")));
            match key.trim() {
                "L" => l = Some(num(val)?),
                "N" => n = Some(val.parse::<usize>().map_err(|e| err(no + 1, format!("bad N `{val}`: {e}")))?),
                "o" => {
                    let parts: Vec<&str> = val.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(err(no + 1, "pole needs three coordinates".into()));
                    }
                    pole = Some([num(parts[0])?, num(parts[1])?, num(parts[2])?]);
                }
                "kind" => kind = Some(val.to_string()),
                "mass" => mass = num(val)?,
                other => return Err(err(no + 1, format!("unknown key `{other}`"))),
            }
        }
        let missing = |k: &str| err(0, format!("missing key `{k}`"));
        Ok(Self {
            l: l.ok_or_else(|| missing("L"))?,
            n: n.ok_or_else(|| missing("N"))?,
            pole: pole.ok_or_else(|| missing("o"))?,
            kind: kind.ok_or_else(|| missing("kind"))?,
            far_mass: mass,
        })
    }
}

/// Writes the node values and the sidecar header.
pub fn write_field(field: &ConformalField, path: &Path) -> Result<()> {
    let spec = field.spec();
    let header = FieldHeader {
        l: spec.l,
        n: spec.n,
        pole: spec.pole,
        kind: field.kind().to_string(),
        far_mass: field.far_mass(),
    };
    let bytes: Vec<u8> = field.phi_nodes().iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let hp = header_path(path);
    std::fs::write(&hp, header.render()).map_err(|e| Error::io(hp, e))
}

/// Reads a field block; the result interpolates `φ` trilinearly.
pub fn read_field(path: &Path) -> Result<ConformalField> {
    let hp = header_path(path);
    let text = std::fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let header = FieldHeader::parse(&text, &hp.display().to_string())?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::param("field", format!("{} bytes is not a whole number of f64 values", bytes.len())));
    }
    let phi: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let spec = GridSpec::new(header.l, header.n, header.pole)?;
    ConformalField::from_samples(spec, phi, header.far_mass, &header.kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricModel;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phi.f64");
        let model = MetricModel::smoothed_schwarzschild(1.0, 0.5).unwrap();
        let spec = GridSpec::new(40.0, 32, [2.0, -1.0, 0.5]).unwrap();
        let field = ConformalField::from_model(&model, spec).unwrap();
        write_field(&field, &path).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.phi_nodes(), field.phi_nodes());
        assert_eq!(back.spec(), field.spec());
        assert_eq!(back.far_mass(), 1.0);
        assert!(back.model().is_none());
    }

    #[test]
    fn header_errors_are_line_addressed() {
        let err = FieldHeader::parse("L = 1\nN = x\n", "h").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
