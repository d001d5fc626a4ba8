"""Random-binning coding with interference pre-subtraction over the noisy-interference
channel at short block lengths.

The codebook holds K*L i.i.d. Gaussian words of the auxiliary U, split into
K bins of L words each; bin k carries message k. The encoder picks the word
in the message's bin whose empirical moments with the transmitter's
observation M1 best match the nominal joint law, and sends X = U - alpha*M1.
The decoder finds the maximum-likelihood word given (Y, M2) over the whole
codebook and reports its bin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .capacity_engine import capacity, mi_u_m1, optimal_alpha_closed_form
from .channel import ChannelConfig
from .errors import DecodeFailure, EncodeFailure, SingularMatrix, SizeOverflow
from .gaussian import build_joint_spec, cholesky

DEFAULT_N = 12
DEFAULT_EPSILON = 0.25
DEFAULT_POWER_SLACK = 0.1
MAX_EXPONENT_BITS = 27.0
MAX_SCALARS = 10**8


@dataclass(frozen=True)
class CodebookParams:
    n: int
    rate: float
    bin_count: int
    codewords_per_bin: int
    alpha: float
    epsilon: float = DEFAULT_EPSILON
    power_slack: float = DEFAULT_POWER_SLACK

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("block length must be >= 1")
        if self.bin_count < 1 or self.codewords_per_bin < 1:
            raise ValueError("bin_count and codewords_per_bin must be >= 1")
        if self.power_slack < 0:
            raise ValueError("power_slack must be >= 0")

    @property
    def total_words(self) -> int:
        return self.bin_count * self.codewords_per_bin

    @classmethod
    def auto(cls, cfg: ChannelConfig, n: int = DEFAULT_N, rate: float = 0.0,
             alpha: float | None = None, epsilon: float = DEFAULT_EPSILON,
             power_slack: float = DEFAULT_POWER_SLACK,
             max_exponent: float = MAX_EXPONENT_BITS) -> "CodebookParams":
        """Size the bins as ceil(2^(n (I(U;M1) + epsilon))) words each.

        ``alpha`` defaults to the optimal coefficient for ``cfg``.
        """
        n1, n2 = _single_pair(cfg)
        if alpha is None:
            alpha = optimal_alpha_closed_form(cfg.p, cfg.q, cfg.n0, n1, n2).alpha_star
        exponent = n * (mi_u_m1(cfg.p, cfg.q, n1, alpha) + epsilon)
        if exponent > max_exponent:
            raise SizeOverflow(
                f"bin size 2^{exponent:.1f} exceeds the 2^{max_exponent:g} guardrail"
            )
        per_bin = max(1, math.ceil(2.0**exponent))
        bins = max(1, round(2.0 ** (n * rate)))
        return cls(n, rate, bins, per_bin, float(alpha), epsilon, power_slack)


def _single_pair(cfg):
    if len(cfg.tx_noise) != 1 or len(cfg.rx_noise) != 1:
        raise ValueError("coding needs exactly one observation per side; apply reduce_config() first")
    return cfg.tx_noise[0], cfg.rx_noise[0]


class Codebook:
    """K bins of L words; word ``i`` lives in bin ``i // L``.

    The words are i.i.d., so storing bins contiguously is equivalent in law to
    a uniformly random assignment of words to equal-size bins.
    """

    def __init__(self, params: CodebookParams, words: np.ndarray):
        self.params = params
        self.words = words
        self.words.setflags(write=False)
        self._tree = None

    def __len__(self):
        return self.words.shape[0]

    def bin_of(self, index):
        return np.asarray(index) // self.params.codewords_per_bin

    def bin_words(self, w: int) -> np.ndarray:
        L = self.params.codewords_per_bin
        return self.words[w * L:(w + 1) * L]

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.words)
        return self._tree


def build_codebook(cfg: ChannelConfig, params: CodebookParams, seed, max_scalars: int = MAX_SCALARS) -> Codebook:
    n1, _ = _single_pair(cfg)
    scalars = params.total_words * params.n
    if scalars > max_scalars:
        raise SizeOverflow(f"codebook needs {scalars} scalars, budget is {max_scalars}")
    var_u = cfg.p + params.alpha**2 * (cfg.q + n1)
    rng = np.random.default_rng(seed)
    words = rng.standard_normal((params.total_words, params.n))
    words *= math.sqrt(var_u)
    return Codebook(params, words)


@dataclass(frozen=True)
class _NominalLaw:
    var_u: float
    cov_um: float
    var_m: float
    # E[U | Y, M2] = gain_y * y + gain_m * m2
    gain_y: float
    gain_m: float

    @classmethod
    def of(cls, cfg: ChannelConfig, alpha: float) -> "_NominalLaw":
        spec = build_joint_spec(cfg, alpha)
        m1, m2 = cfg.tx_labels[0], cfg.rx_labels[0]
        c = spec.marginal(["U", m1])
        var_u, cov_um, var_m = float(c[0, 0]), float(c[0, 1]), float(c[1, 1])
        sigma = spec.marginal(["U", "Y", m2])
        try:
            cholesky(sigma)
        except SingularMatrix:
            # exact linear ties (e.g. U == Y on a noiseless channel); a tiny
            # ridge turns the ML rule into nearest-neighbour along them
            sigma = sigma + 1e-12 * float(np.max(np.diag(sigma))) * np.eye(3)
        prec = np.linalg.inv(sigma)
        return cls(var_u, cov_um, var_m, -prec[0, 1] / prec[0, 0], -prec[0, 2] / prec[0, 0])


def typicality_scores(words: np.ndarray, m1: np.ndarray, law: _NominalLaw) -> np.ndarray:
    """Squared standardized distance of (|u|^2/n, u.m1/n, |m1|^2/n) from nominal.

    Each moment is scaled by its standard deviation under the nominal law,
    so for a jointly typical pair the score is roughly chi-square with 3
    degrees of freedom.
    """
    n = m1.shape[-1]
    uu = np.einsum("ij,ij->i", words, words) / n
    um = words @ m1 / n
    mm = float(m1 @ m1) / n
    sd_uu = math.sqrt(2.0 / n) * law.var_u
    sd_um = math.sqrt((law.var_u * law.var_m + law.cov_um**2) / n)
    sd_mm = math.sqrt(2.0 / n) * law.var_m
    return (
        ((uu - law.var_u) / sd_uu) ** 2
        + ((um - law.cov_um) / sd_um) ** 2
        + ((mm - law.var_m) / sd_mm) ** 2
    )


def _select(book, w, m1, law, threshold):
    cand = book.bin_words(w)
    scores = typicality_scores(cand, m1, law)
    j = int(np.argmin(scores))
    if threshold is not None and not scores[j] <= threshold:
        raise EncodeFailure("atypical")
    return cand[j]


def encode(book: Codebook, w: int, m1, cfg: ChannelConfig, typicality_threshold: float | None = None,
           _law: _NominalLaw | None = None) -> np.ndarray:
    """Transmit signal for message ``w`` given the transmitter's observation.

    Raises EncodeFailure("atypical") if no word in the bin scores within
    ``typicality_threshold`` (no threshold: the best word is always taken),
    and EncodeFailure("power") when the resulting X exceeds P*(1+power_slack).
    """
    params = book.params
    if not 0 <= w < params.bin_count:
        raise ValueError(f"message index {w} outside [0, {params.bin_count})")
    m1 = np.asarray(m1, dtype=float)
    law = _law or _NominalLaw.of(cfg, params.alpha)
    u = _select(book, w, m1, law, typicality_threshold)
    x = u - params.alpha * m1
    power = float(x @ x) / params.n
    if power > cfg.p * (1.0 + params.power_slack):
        raise EncodeFailure("power", power)
    return x


@dataclass(frozen=True)
class ChannelDraw:
    """One block of interference and noise realizations."""

    s: np.ndarray
    z0: np.ndarray
    z1: np.ndarray
    z2: np.ndarray

    @classmethod
    def draw(cls, cfg: ChannelConfig, n: int, rng: np.random.Generator) -> "ChannelDraw":
        n1, n2 = _single_pair(cfg)
        z = rng.standard_normal((4, n))
        scale = np.sqrt([cfg.q, cfg.n0, n1, n2])[:, None]
        s, z0, z1, z2 = z * scale
        return cls(s, z0, z1, z2)

    @property
    def m1(self):
        return self.s + self.z1

    @property
    def m2(self):
        return self.s + self.z2

    def output(self, x):
        return x + self.s + self.z0


def transmit(x, cfg: ChannelConfig, seed) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pass ``x`` through the channel; returns (y, m1, m2)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    draw = ChannelDraw.draw(cfg, x.shape[-1], np.random.default_rng(seed))
    return draw.output(x), draw.m1, draw.m2


def decode_batch(book: Codebook, y, m2, cfg: ChannelConfig, _law: _NominalLaw | None = None) -> np.ndarray:
    """ML bin decisions for a stack of received blocks (rows).

    Under the nominal Gaussian law the log-likelihood of word u is, up to
    terms free of u, -|u - E[U|y,m2]|^2 * J_uu / 2, so the ML word is the
    codeword nearest to the conditional mean.
    """
    law = _law or _NominalLaw.of(cfg, book.params.alpha)
    y = np.atleast_2d(np.asarray(y, dtype=float))
    m2 = np.atleast_2d(np.asarray(m2, dtype=float))
    target = law.gain_y * y + law.gain_m * m2
    if not np.all(np.isfinite(target)):
        raise DecodeFailure("non-finite decoding target")
    if len(book) == 1:
        return book.bin_of(np.zeros(len(target), dtype=int))
    dist, idx = book.tree.query(target, k=2)
    # exact ties go to the lowest index
    best = np.where(dist[:, 0] == dist[:, 1], idx.min(axis=1), idx[:, 0])
    return book.bin_of(best)


def decode(book: Codebook, y, m2, cfg: ChannelConfig) -> int:
    return int(decode_batch(book, y, m2, cfg)[0])


@dataclass(frozen=True)
class TrialRecord:
    w_sent: int
    w_decoded: int | None
    encode_failed: bool
    failure_reason: str | None
    tx_power: float | None
    u_m1: float | None = None


@dataclass(frozen=True)
class SimReport:
    trials: int
    block_error_rate: float
    encode_failure_rate: float
    mean_tx_power: float
    params: CodebookParams
    seed: int
    config: ChannelConfig
    records: tuple[TrialRecord, ...] = field(default=(), repr=False)

    @property
    def std_error(self) -> float:
        p = self.block_error_rate
        return math.sqrt(p * (1.0 - p) / self.trials)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "block_error_rate": self.block_error_rate,
            "block_error_std_error": self.std_error,
            "encode_failure_rate": self.encode_failure_rate,
            "mean_tx_power": self.mean_tx_power,
            "n": self.params.n,
            "rate": self.params.rate,
            "bin_count": self.params.bin_count,
            "codewords_per_bin": self.params.codewords_per_bin,
            "alpha": self.params.alpha,
            "epsilon": self.params.epsilon,
            "power_slack": self.params.power_slack,
            "seed": self.seed,
            **self.config.to_dict(),
        }


def run_trials(cfg: ChannelConfig, params: CodebookParams, trials: int, seed: int,
               max_scalars: int = MAX_SCALARS, typicality_threshold: float | None = None) -> SimReport:
    """Monte Carlo block-error estimate for the binning scheme.

    Each trial draws (S, Z0, Z1, Z2), forms M1, picks a uniform message,
    encodes, sends through the same S and Z0, and decodes with M2. Encoding
    failures count as block errors.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    book_seed, *trial_seeds = np.random.SeedSequence(seed).spawn(trials + 1)
    book = build_codebook(cfg, params, book_seed, max_scalars)
    law = _NominalLaw.of(cfg, params.alpha)

    sent, powers, reasons, um = [], [], [], []
    ys, m2s, ok = [], [], []
    for ss in trial_seeds:
        rng = np.random.default_rng(ss)
        w = int(rng.integers(params.bin_count))
        draw = ChannelDraw.draw(cfg, params.n, rng)
        m1 = draw.m1
        sent.append(w)
        try:
            x = encode(book, w, m1, cfg, typicality_threshold, _law=law)
        except EncodeFailure as exc:
            reasons.append(exc.reason)
            powers.append(exc.tx_power)
            um.append(None)
            continue
        u = x + params.alpha * m1
        reasons.append(None)
        powers.append(float(x @ x) / params.n)
        um.append(float(u @ m1) / params.n)
        ok.append(len(sent) - 1)
        ys.append(draw.output(x))
        m2s.append(draw.m2)

    decoded = {}
    if ok:
        bins = decode_batch(book, np.array(ys), np.array(m2s), cfg, _law=law)
        decoded = dict(zip(ok, (int(b) for b in bins)))

    records = []
    errors = failures = 0
    for t in range(trials):
        failed = reasons[t] is not None
        w_hat = None if failed else decoded[t]
        failures += failed
        errors += failed or w_hat != sent[t]
        records.append(TrialRecord(sent[t], w_hat, failed, reasons[t], powers[t], um[t]))

    good_powers = [powers[t] for t in ok]
    mean_power = float(np.mean(good_powers)) if good_powers else math.nan
    return SimReport(trials, errors / trials, failures / trials, mean_power, params, seed, cfg, tuple(records))


def simulate(cfg: ChannelConfig, rate_frac: float, trials: int, seed: int, n: int = DEFAULT_N,
             epsilon: float = DEFAULT_EPSILON, power_slack: float = DEFAULT_POWER_SLACK,
             alpha: float | None = None, max_scalars: int = MAX_SCALARS) -> SimReport:
    """Run the harness at a rate given as a fraction of the channel capacity."""
    rate = rate_frac * capacity(cfg).value
    params = CodebookParams.auto(cfg, n, rate, alpha, epsilon, power_slack)
    return run_trials(cfg, params, trials, seed, max_scalars)
