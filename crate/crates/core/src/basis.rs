//! Fixed-particle-number occupation bases.
//!
//! A single spin species on `N` sites is described by an `N`-bit word in
//! which bit `s` marks site `s` as occupied. Words of a sector are kept in
//! ascending numeric order, which coincides with colexicographic order of
//! the occupied-site sets, so the rank of a word is its combinadic
//! `sum_i C(s_i, i + 1)` over the occupied sites `s_0 < s_1 < ...`.
//!
//! The many-body basis at fixed `(n_up, n_dn)` is the product of an up and
//! a down sector, indexed as `i_up * D_dn + i_dn`.

use crate::error::{Error, Result};

/// Widest chain a word can describe.
pub const MAX_SITES: usize = 32;

/// Occupation word of one spin species.
pub type Word = u32;

/// Binomial coefficients `C(n, k)` for `n, k <= MAX_SITES`.
#[derive(Debug, Clone)]
struct Binomials {
    table: Vec<u64>,
}

impl Binomials {
    fn new() -> Self {
        let w = MAX_SITES + 1;
        let mut table = vec![0u64; w * w];
        for n in 0..w {
            table[n * w] = 1;
            for k in 1..=n {
                table[n * w + k] =
                    table[(n - 1) * w + k - 1] + if k < n { table[(n - 1) * w + k] } else { 0 };
            }
        }
        Self { table }
    }

    #[inline]
    fn get(&self, n: usize, k: usize) -> u64 {
        if k > n {
            0
        } else {
            self.table[n * (MAX_SITES + 1) + k]
        }
    }
}

/// `C(n, k)`; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// All occupation words of `particles` fermions on `sites` sites.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    sites: usize,
    particles: usize,
    words: Vec<Word>,
    binom: Binomials,
}

impl SectorBasis {
    /// Enumerates the sector in ascending numeric order.
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        if sites > MAX_SITES {
            return Err(Error::param(format!(
                "{sites} sites exceed the {MAX_SITES}-bit occupation word"
            )));
        }
        if particles > sites {
            return Err(Error::param(format!(
                "{particles} particles do not fit on {sites} sites"
            )));
        }
        let dim = binomial(sites, particles) as usize;
        let mut words = Vec::with_capacity(dim);
        if particles == 0 {
            words.push(0);
        } else {
            // Gosper's hack walks same-popcount words in increasing order.
            let mut w: u64 = (1u64 << particles) - 1;
            let limit = 1u64 << sites;
            while w < limit {
                words.push(w as Word);
                let c = w & w.wrapping_neg();
                let r = w + c;
                w = (((r ^ w) >> 2) / c) | r;
            }
        }
        debug_assert_eq!(words.len(), dim);
        Ok(Self {
            sites,
            particles,
            words,
            binom: Binomials::new(),
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    /// Number of words `C(N, k)`.
    pub fn dim(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    #[inline]
    pub fn unrank(&self, rank: usize) -> Word {
        self.words[rank]
    }

    /// Combinadic rank of `word`, or `None` if it does not belong to the sector.
    #[inline]
    pub fn rank(&self, word: Word) -> Option<usize> {
        if (self.sites < MAX_SITES && (word as u64) >> self.sites != 0)
            || word.count_ones() as usize != self.particles
        {
            return None;
        }
        let mut rest = word;
        let mut rank = 0u64;
        let mut i = 1;
        while rest != 0 {
            let s = rest.trailing_zeros() as usize;
            rank += self.binom.get(s, i);
            i += 1;
            rest &= rest - 1;
        }
        Some(rank as usize)
    }
}

/// Index into the product of an up sector and a down sector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompositeIndex {
    pub up: usize,
    pub dn: usize,
}

impl CompositeIndex {
    #[inline]
    pub fn global(self, dn_dim: usize) -> usize {
        self.up * dn_dim + self.dn
    }

    #[inline]
    pub fn from_global(global: usize, dn_dim: usize) -> Self {
        Self {
            up: global / dn_dim,
            dn: global % dn_dim,
        }
    }
}

/// Up and down sectors together.
#[derive(Debug, Clone)]
pub struct FockBasis {
    pub up: SectorBasis,
    pub dn: SectorBasis,
}

impl FockBasis {
    pub fn new(sites: usize, n_up: usize, n_dn: usize) -> Result<Self> {
        Ok(Self {
            up: SectorBasis::new(sites, n_up)?,
            dn: SectorBasis::new(sites, n_dn)?,
        })
    }

    /// Half filling: `N/2` electrons of each spin. `N` must be even.
    pub fn half_filling(sites: usize) -> Result<Self> {
        if !sites.is_multiple_of(2) {
            return Err(Error::param("N must be even"));
        }
        Self::new(sites, sites / 2, sites / 2)
    }

    pub fn sites(&self) -> usize {
        self.up.sites()
    }

    pub fn dim(&self) -> usize {
        self.up.dim() * self.dn.dim()
    }

    /// Up and down words of composite state `global`.
    #[inline]
    pub fn words(&self, global: usize) -> (Word, Word) {
        let idx = CompositeIndex::from_global(global, self.dn.dim());
        (self.up.unrank(idx.up), self.dn.unrank(idx.dn))
    }

    #[inline]
    pub fn index_of(&self, up: Word, dn: Word) -> Option<usize> {
        let iu = self.up.rank(up)?;
        let id = self.dn.rank(dn)?;
        Some(CompositeIndex { up: iu, dn: id }.global(self.dn.dim()))
    }
}

/// Jordan-Wigner sign of moving one fermion between sites `a` and `b`:
/// `(-1)` to the number of occupied sites strictly between them.
///
/// Exactly one of `a`, `b` must be occupied in `word`.
#[inline]
pub fn hopping_parity(word: Word, a: usize, b: usize) -> f64 {
    debug_assert!(a != b);
    debug_assert!(
        ((word >> a) & 1) != ((word >> b) & 1),
        "hop needs one occupied end"
    );
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let between = if hi - lo < 2 {
        0
    } else {
        let mask = ((1u64 << hi) - (1u64 << (lo + 1))) as Word;
        (word & mask).count_ones()
    };
    if between % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Occupied sites of `word` in ascending order.
pub fn occupied_sites(word: Word) -> impl Iterator<Item = usize> {
    let mut rest = word;
    std::iter::from_fn(move || {
        if rest == 0 {
            None
        } else {
            let s = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            Some(s)
        }
    })
}
