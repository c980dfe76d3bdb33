use crate::error::{Error, Result};

/// Edit operations of a minimum-cost alignment with unit costs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EditCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_len: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    pub fn add(&mut self, other: EditCounts) {
        self.substitutions += other.substitutions;
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.reference_len += other.reference_len;
    }
}

/// Levenshtein alignment of `hypothesis` against `reference`. Among
/// equal-cost alignments the backtrace takes a match or substitution before
/// a deletion, and a deletion before an insertion.
pub fn align<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = usize::from(reference[i - 1].as_ref() != hypothesis[j - 1].as_ref());
            d[i][j] = (d[i - 1][j - 1] + sub).min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let mut out = EditCounts {
        reference_len: n,
        ..EditCounts::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let sub = usize::from(reference[i - 1].as_ref() != hypothesis[j - 1].as_ref());
            if d[i][j] == d[i - 1][j - 1] + sub {
                out.substitutions += sub;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            out.deletions += 1;
            i -= 1;
        } else {
            out.insertions += 1;
            j -= 1;
        }
    }
    out
}

/// (substitutions + insertions + deletions) / reference length.
pub fn wer<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    let e = align(reference, hypothesis);
    Ok(e.errors() as f64 / e.reference_len as f64)
}

/// Word-weighted error rate of a set of utterances: total errors over total
/// reference words.
pub fn corpus_wer<S: AsRef<str>, T: AsRef<str>>(pairs: &[(Vec<S>, Vec<T>)]) -> Result<f64> {
    let mut total = EditCounts::default();
    for (r, h) in pairs {
        if r.is_empty() {
            return Err(Error::EmptyReference);
        }
        total.add(align(r, h));
    }
    if total.reference_len == 0 {
        return Err(Error::EmptyReference);
    }
    Ok(total.errors() as f64 / total.reference_len as f64)
}
