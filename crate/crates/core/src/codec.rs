//! JSON encoding of dense complex matrices: row-major nested arrays of `[re, im]` pairs.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{c, CMat};

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMat) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<CMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Shape("ragged matrix rows in JSON".into()));
    }
    Ok(CMat::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

/// Serde adapter for `CMat` fields (`#[serde(with = "crate::codec::matrix")]`).
pub mod matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_json(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let rows = MatrixJson::deserialize(d)?;
        matrix_from_json(&rows).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for `Vec<CMat>` fields.
pub mod matrix_list {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[CMat], s: S) -> std::result::Result<S::Ok, S::Error> {
        ms.iter().map(matrix_to_json).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<CMat>, D::Error> {
        let list = Vec::<MatrixJson>::deserialize(d)?;
        list.iter()
            .map(|rows| matrix_from_json(rows).map_err(serde::de::Error::custom))
            .collect()
    }
}

/// Serde adapter for `Option<CMat>` fields; pair with `#[serde(default)]`.
pub mod option_matrix {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<CMat>, s: S) -> std::result::Result<S::Ok, S::Error> {
        m.as_ref().map(matrix_to_json).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<CMat>, D::Error> {
        Option::<MatrixJson>::deserialize(d)?
            .map(|rows| matrix_from_json(&rows).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn json_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_matrix(&mut rng, 3);
        let text = serde_json::to_string(&matrix_to_json(&m)).unwrap();
        let back: MatrixJson = serde_json::from_str(&text).unwrap();
        assert_eq!(matrix_from_json(&back).unwrap(), m);
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows: MatrixJson = vec![vec![[1.0, 0.0]], vec![[0.0, 0.0], [1.0, 0.0]]];
        assert!(matrix_from_json(&rows).is_err());
    }
}
