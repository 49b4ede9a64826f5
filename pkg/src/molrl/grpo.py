"""Supervised warm-up loss and GRPO on a tabular autoregressive toy policy.

The policy is a lookup table of logits keyed by (prompt, last ``w`` emitted
tokens). Everything is small enough to enumerate, so analytic gradients can be
checked coordinate-by-coordinate against finite differences.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from . import rewards as rw
from .selfies import alphabet, symbols

ANSWER_OPEN, ANSWER_CLOSE, EOS = "<answer>", "</answer>", "<eos>"
Context = tuple
Grad = dict  # Context -> np.ndarray


class UnknownToken(KeyError):
    pass


class RatioOverflow(FloatingPointError):
    pass


@dataclass
class GrpoConfig:
    group_size: int = 8
    temperature: float = 0.7
    clip_eps: float = 0.2
    kl_beta: float = 0.04
    batch_size: int = 256
    learning_rate: float = 100.0  # tabular logits; per-token gradients are tiny after averaging
    epochs: int = 15
    steps_per_epoch: int = 4
    updates_per_batch: int = 1
    max_grad_norm: float | None = 0.05
    max_new_tokens: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.group_size < 2:
            raise ValueError("group_size must be >= 2")
        if not 0 < self.clip_eps < 1:
            raise ValueError("clip_eps must lie in (0, 1)")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.kl_beta < 0:
            raise ValueError("kl_beta must be non-negative")

    @classmethod
    def from_dict(cls, data: dict) -> "GrpoConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass
class ToyPolicy:
    vocab: tuple[str, ...]
    window: int = 3
    temperature: float = 1.0
    params: dict[Context, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.index = {t: k for k, t in enumerate(self.vocab)}
        if len(self.index) != len(self.vocab):
            raise ValueError("duplicate vocabulary entries")

    def token_id(self, tok: str) -> int:
        try:
            return self.index[tok]
        except KeyError:
            raise UnknownToken(tok) from None

    def context(self, prompt: Sequence[str], prefix: Sequence[str]) -> Context:
        tail = tuple(prefix[-self.window:]) if self.window else ()
        return (tuple(prompt), tail)

    def logits(self, ctx: Context) -> np.ndarray:
        theta = self.params.get(ctx)
        return np.zeros(len(self.vocab)) if theta is None else theta

    def probs(self, ctx: Context, temperature: float | None = None) -> np.ndarray:
        return softmax(self.logits(ctx) / (temperature or self.temperature))

    def log_prob(self, ctx: Context, tok: int, temperature: float | None = None) -> float:
        z = self.logits(ctx) / (temperature or self.temperature)
        m = z.max()
        return float(z[tok] - m - math.log(np.exp(z - m).sum()))

    def copy(self) -> "ToyPolicy":
        return ToyPolicy(self.vocab, self.window, self.temperature, {k: v.copy() for k, v in self.params.items()})

    def apply(self, grad: Grad, step: float) -> None:
        for ctx, g in grad.items():
            self.params[ctx] = self.logits(ctx) + step * g

    def num_params(self) -> int:
        return len(self.params) * len(self.vocab)


def _accumulate(grad: Grad, ctx: Context, vec: np.ndarray) -> None:
    if ctx in grad:
        grad[ctx] += vec
    else:
        grad[ctx] = vec.copy()


def _grad_log_prob(policy: ToyPolicy, ctx: Context, tok: int, temperature: float) -> np.ndarray:
    p = policy.probs(ctx, temperature)
    g = -p
    g[tok] += 1.0
    return g / temperature


def sft_loss(policy: ToyPolicy, prompt: Sequence[str], target: Sequence[str]) -> tuple[float, Grad]:
    """Negative log-likelihood of ``target`` given ``prompt`` and its gradient."""
    if not target:
        raise ValueError("empty target")
    for tok in prompt:
        policy.token_id(tok)
    loss = 0.0
    grad: Grad = {}
    for t, tok in enumerate(target):
        k = policy.token_id(tok)
        ctx = policy.context(prompt, target[:t])
        loss -= policy.log_prob(ctx, k)
        _accumulate(grad, ctx, -_grad_log_prob(policy, ctx, k, policy.temperature))
    return loss, grad


@dataclass
class Rollout:
    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]

    def text(self) -> str:
        return "".join(t for t in self.tokens if t != EOS)


@dataclass
class RolloutGroup:
    prompt: tuple[str, ...]
    responses: list[Rollout]
    rewards: list[float] = field(default_factory=list)
    advantages: list[float] = field(default_factory=list)
    reference: str | None = None

    @property
    def group_size(self) -> int:
        return len(self.responses)


def sample_response(policy: ToyPolicy, prompt: Sequence[str], temperature: float, max_new: int, rng: np.random.Generator) -> Rollout:
    toks: list[str] = []
    lps: list[float] = []
    while len(toks) < max_new:
        ctx = policy.context(prompt, toks)
        p = policy.probs(ctx, temperature)
        k = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        k = min(k, len(p) - 1)
        toks.append(policy.vocab[k])
        lps.append(policy.log_prob(ctx, k, temperature))
        if policy.vocab[k] == EOS:
            break
    return Rollout(tuple(toks), tuple(lps))


def sample_group(policy: ToyPolicy, prompt: Sequence[str], cfg: GrpoConfig, rng_seed) -> RolloutGroup:
    rng = np.random.default_rng(rng_seed)
    responses = [sample_response(policy, prompt, cfg.temperature, cfg.max_new_tokens, rng) for _ in range(cfg.group_size)]
    return RolloutGroup(tuple(prompt), responses)


def advantages(rewards: Sequence[float], G: int | None = None, floor: float = 1e-8) -> list[float]:
    r = np.asarray(rewards, dtype=float)
    if G is not None and len(r) != G:
        raise ValueError(f"expected {G} rewards, got {len(r)}")
    if len(r) < 2:
        raise ValueError("need at least two rewards")
    std = r.std()
    if std < floor:
        return [0.0] * len(r)
    return list((r - r.mean()) / std)


@dataclass
class ObjectiveStats:
    objective: float
    gradient: Grad
    kl: float
    clip_fraction: float


def grpo_terms(policy: ToyPolicy, old: ToyPolicy, ref: ToyPolicy, groups: Sequence[RolloutGroup], cfg: GrpoConfig) -> ObjectiveStats:
    T, eps, beta = cfg.temperature, cfg.clip_eps, cfg.kl_beta
    total, kl_total, n_tok, n_clip = 0.0, 0.0, 0, 0
    grad: Grad = {}
    for group in groups:
        if len(group.advantages) != group.group_size:
            raise ValueError("group advantages not computed")
        g_scale = 1.0 / (len(groups) * group.group_size)
        for resp, adv in zip(group.responses, group.advantages):
            if not resp.tokens:
                continue
            scale = g_scale / len(resp.tokens)
            for t, tok in enumerate(resp.tokens):
                k = policy.token_id(tok)
                ctx = policy.context(group.prompt, resp.tokens[:t])
                lp = policy.log_prob(ctx, k, T)
                log_ratio = lp - old.log_prob(ctx, k, T)
                if abs(log_ratio) > 30:
                    raise RatioOverflow(f"|log ratio| = {abs(log_ratio):.1f}")
                ratio = math.exp(log_ratio)
                clipped = min(max(ratio, 1 - eps), 1 + eps)
                unclipped_active = ratio * adv <= clipped * adv
                surrogate = min(ratio * adv, clipped * adv)
                rho = math.exp(ref.log_prob(ctx, k, T) - lp)
                kl = rho - math.log(rho) - 1
                total += scale * (surrogate - beta * kl)
                kl_total += kl
                n_tok += 1
                n_clip += not unclipped_active
                coef = (adv * ratio if unclipped_active else 0.0) - beta * (1 - rho)
                if coef:
                    _accumulate(grad, ctx, scale * coef * _grad_log_prob(policy, ctx, k, T))
    return ObjectiveStats(total, grad, kl_total / max(n_tok, 1), n_clip / max(n_tok, 1))


def grpo_objective(policy: ToyPolicy, old: ToyPolicy, ref: ToyPolicy, groups: Sequence[RolloutGroup], cfg: GrpoConfig) -> tuple[float, Grad]:
    """Clipped surrogate minus beta * KL(pi || ref), per-response length-normalised."""
    stats = grpo_terms(policy, old, ref, groups, cfg)
    return stats.objective, stats.gradient


# ---------------------------------------------------------------------------
# training


def grad_norm(grad: Grad) -> float:
    return math.sqrt(sum(float(g @ g) for g in grad.values()))


def clip_grad(grad: Grad, max_norm: float | None) -> Grad:
    if max_norm is None:
        return grad
    norm = grad_norm(grad)
    if norm <= max_norm:
        return grad
    return {k: v * (max_norm / norm) for k, v in grad.items()}

LOG_FIELDS = ("epoch", "mean_reward", "format_rate", "mean_similarity", "objective", "kl")


@dataclass
class EpochLog:
    epoch: int
    mean_reward: float
    format_rate: float
    mean_similarity: float
    objective: float
    kl: float


def reward_fn_for(kind: str, mask: rw.RewardMask = rw.FULL) -> Callable[[str, str], rw.RewardBreakdown]:
    if kind not in rw.TASKS:
        raise ValueError(f"unknown reward kind {kind!r}")
    return lambda text, ref: rw.score(text, ref, kind, mask)


def train(policy: ToyPolicy, tasks: Sequence[tuple[Sequence[str], str]], reward_kind: str, cfg: GrpoConfig,
          ref: ToyPolicy | None = None, mask: rw.RewardMask = rw.FULL) -> list[EpochLog]:
    """Run GRPO in place on ``policy``; returns one log row per epoch.

    Each step snapshots the policy as ``old``, samples a group per task in the
    batch, scores it, then applies ``updates_per_batch`` gradient-ascent steps.
    """
    reward = reward_fn_for(reward_kind, mask)
    ref = ref if ref is not None else policy.copy()
    cache: dict[tuple[str, str], rw.RewardBreakdown] = {}
    logs = []
    batch = min(cfg.batch_size, len(tasks))
    for epoch in range(1, cfg.epochs + 1):
        rewards_seen, formats, sims, objs, kls = [], [], [], [], []
        for step in range(cfg.steps_per_epoch):
            start = (step * batch) % len(tasks)
            chosen = [(start + j) % len(tasks) for j in range(batch)]
            old = policy.copy()
            groups = []
            for j in chosen:
                prompt, reference = tasks[j]
                seed = np.random.SeedSequence([cfg.seed, epoch, step, j])
                group = sample_group(old, prompt, cfg, seed)
                for resp in group.responses:
                    key = (resp.text(), reference)
                    if key not in cache:
                        cache[key] = reward(*key)
                    br = cache[key]
                    group.rewards.append(br.total)
                    formats.append(br.format_component > 0)
                    sims.append(br.similarity_component)
                group.advantages = advantages(group.rewards, cfg.group_size)
                group.reference = reference
                rewards_seen.extend(group.rewards)
                groups.append(group)
            for _ in range(cfg.updates_per_batch):
                stats = grpo_terms(policy, old, ref, groups, cfg)
                policy.apply(clip_grad(stats.gradient, cfg.max_grad_norm), cfg.learning_rate)
            objs.append(stats.objective)
            kls.append(stats.kl)
        logs.append(EpochLog(epoch, float(np.mean(rewards_seen)), float(np.mean(formats)),
                             float(np.mean(sims)), float(np.mean(objs)), float(np.mean(kls))))
    return logs


def sft_warmup(policy: ToyPolicy, examples: Sequence[tuple[Sequence[str], Sequence[str]]], steps: int, lr: float) -> list[float]:
    """Plain gradient descent on the summed NLL; returns the loss per step."""
    history = []
    for _ in range(steps):
        total = 0.0
        for prompt, target in examples:
            loss, grad = sft_loss(policy, prompt, target)
            policy.apply(grad, -lr)
            total += loss
        history.append(total)
    return history


def log_to_csv(logs: Sequence[EpochLog]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, LOG_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in logs:
        d = asdict(row)
        writer.writerow({k: (f"{v:.10f}" if isinstance(v, float) else v) for k, v in d.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# toy SELFIES-copy task

COPY_TARGETS = (
    "[C][O]",
    "[C][C][O]",
    "[O][=C][O]",
    "[C][=C][C]",
    "[C][N]",
    "[C][C][N]",
    "[C][S]",
    "[O][=C][N]",
)


def copy_vocab() -> tuple[str, ...]:
    atoms = ("[C]", "[O]", "[N]", "[S]", "[=C]", "[=O]", "[=N]")
    return (ANSWER_OPEN, ANSWER_CLOSE, EOS) + atoms


def copy_tasks(targets: Sequence[str] = COPY_TARGETS) -> list[tuple[tuple[str, ...], str]]:
    return [(tuple(symbols(t)), t) for t in targets]


def copy_target_tokens(reference: str) -> tuple[str, ...]:
    return (ANSWER_OPEN, *symbols(reference), ANSWER_CLOSE, EOS)


def full_alphabet_vocab() -> tuple[str, ...]:
    return (ANSWER_OPEN, ANSWER_CLOSE, EOS) + tuple(alphabet())


@dataclass
class DemoConfig:
    grpo: GrpoConfig = field(default_factory=GrpoConfig)
    warmup_steps: int = 3
    warmup_lr: float = 0.5
    window: int = 3

    @classmethod
    def from_dict(cls, data: dict) -> "DemoConfig":
        data = dict(data)
        grpo = GrpoConfig.from_dict(data.pop("grpo", {}))
        known = {f.name for f in fields(cls)} - {"grpo"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(grpo=grpo, **data)


def run_copy_demo(cfg: DemoConfig | None = None, targets: Sequence[str] = COPY_TARGETS) -> tuple[ToyPolicy, list[EpochLog]]:
    """Brief supervised warm-up on the copy task, then GRPO with the generation reward."""
    cfg = cfg or DemoConfig()
    tasks = copy_tasks(targets)
    policy = ToyPolicy(copy_vocab(), cfg.window, cfg.grpo.temperature)
    sft_warmup(policy, [(p, copy_target_tokens(r)) for p, r in tasks], cfg.warmup_steps, cfg.warmup_lr)
    logs = train(policy, tasks, rw.GENERATION, cfg.grpo)
    return policy, logs
