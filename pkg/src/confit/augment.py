"""Paraphrase-based data augmentation.

A planner maps observed class counts to per-class generation targets, a
provider turns single texts into paraphrases (an HTTP text-generation
service, or a deterministic mock for tests and offline runs), and
augment_dataset expands a training set according to a plan. Augmentation
is meant for training data only; evaluation sets must never receive
paraphrases of training texts.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import requests

from .corpus import ClassDistribution, Dataset, LabeledExample, round_half_up
from .errors import AugmentationError, ProviderError, ValidationError
from .rng import SplitMix64, derive_seed

DEFAULT_PROMPT_TEMPLATE = "riformulare questo testo: {text}"
DEFAULT_TEMPERATURE = 0.9
DEFAULT_RETRIES = 3

PROVIDER_URL_ENV = "CONFIT_PROVIDER_URL"
PROVIDER_TOKEN_ENV = "CONFIT_PROVIDER_TOKEN"


@dataclass(frozen=True)
class ParaphraseRequest:
    text: str
    seed: int = 0
    temperature: float = DEFAULT_TEMPERATURE
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE

    def __post_init__(self):
        if self.prompt_template.count("{text}") != 1:
            raise ValueError("prompt_template must contain exactly one {text} placeholder")
        if not math.isfinite(self.temperature) or self.temperature < 0.0:
            raise ValueError(f"temperature must be finite and >= 0, got {self.temperature}")

    def prompt(self) -> str:
        return self.prompt_template.replace("{text}", self.text)


@dataclass(frozen=True)
class AugmentationPlan:
    """How many paraphrases to generate per class."""

    additions: dict[str, int]

    def __post_init__(self):
        for label, n in self.additions.items():
            if n < 0:
                raise ValidationError(f"plan addition for class {label!r} is negative: {n}")

    def total(self) -> int:
        return sum(self.additions.values())


@runtime_checkable
class ParaphraseProvider(Protocol):
    """Anything that can paraphrase one text.

    Providers with deterministic=True must return identical output for
    identical (text, seed).
    """

    deterministic: bool

    def paraphrase(self, request: ParaphraseRequest) -> str: ...


def plan_to_targets(current: ClassDistribution, targets: dict[str, int]) -> AugmentationPlan:
    """Per-class additions needed to reach explicit target counts."""
    additions = {}
    for label, target in targets.items():
        have = current.counts.get(label, 0)
        if target < have:
            raise ValidationError(
                f"target for class {label!r} is {target}, below the current count {have}"
            )
        additions[label] = target - have
    return AugmentationPlan(additions)


def plan_balanced(current: ClassDistribution, multiplier: float = 1.0) -> AugmentationPlan:
    """Plan that raises every class to round_half_up(max_count * multiplier)."""
    if not current.counts:
        raise ValidationError("plan_balanced requires a non-empty distribution")
    if multiplier < 1.0:
        raise ValueError(f"multiplier must be >= 1, got {multiplier}")
    target = round_half_up(max(current.counts.values()) * multiplier)
    return plan_to_targets(current, {label: target for label in current.counts})


def mock_paraphrase(req: ParaphraseRequest) -> str:
    """Deterministic stand-in paraphrase: rotate the whitespace tokens left
    by (seed mod n). Preserves the token multiset; empty/tokenless input
    yields the empty string."""
    tokens = req.text.split()
    if not tokens:
        return ""
    k = req.seed % len(tokens)
    return " ".join(tokens[k:] + tokens[:k])


class MockParaphraser:
    """Offline provider backed by mock_paraphrase."""

    deterministic = True

    def paraphrase(self, request: ParaphraseRequest) -> str:
        return mock_paraphrase(request)


def http_paraphrase(
    req: ParaphraseRequest,
    endpoint: str,
    token: str | None = None,
    retries: int = DEFAULT_RETRIES,
    backoff: float = 0.25,
    timeout: float = 30.0,
) -> str:
    """Request one paraphrase from a text-generation service.

    POSTs ``{endpoint}/paraphrase`` with ``{"prompt", "temperature", "seed"}``
    and returns the stripped ``text`` of the JSON response. Timeouts and
    non-success statuses are retried with exponential backoff up to
    ``retries`` extra attempts; an empty or malformed body fails immediately.
    """
    url = endpoint.rstrip("/") + "/paraphrase"
    headers = {"Content-Type": "application/json"}
    if token is None:
        token = os.environ.get(PROVIDER_TOKEN_ENV)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    body = {"prompt": req.prompt(), "temperature": req.temperature, "seed": req.seed}

    last_error = "no attempt made"
    for attempt in range(retries + 1):
        if attempt > 0:
            time.sleep(backoff * (2 ** (attempt - 1)))
        try:
            response = requests.post(url, json=body, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            last_error = f"request failed: {exc}"
            continue
        if response.status_code != 200:
            last_error = f"status {response.status_code}"
            continue
        try:
            payload = response.json()
        except json.JSONDecodeError as exc:
            raise ProviderError(f"provider returned invalid JSON: {exc}") from exc
        text = payload.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ProviderError("provider returned an empty text body")
        return text.strip()
    raise ProviderError(f"provider at {url} failed after {retries + 1} attempts: {last_error}")


@dataclass
class HttpParaphraser:
    """Provider backed by an HTTP text-generation endpoint."""

    endpoint: str
    token: str | None = None
    retries: int = DEFAULT_RETRIES
    backoff: float = 0.25
    timeout: float = 30.0
    deterministic: bool = field(default=False)

    def paraphrase(self, request: ParaphraseRequest) -> str:
        return http_paraphrase(
            request,
            self.endpoint,
            token=self.token,
            retries=self.retries,
            backoff=self.backoff,
            timeout=self.timeout,
        )


@dataclass(frozen=True)
class _PlannedRequest:
    label: str
    source: LabeledExample
    new_id: str
    request: ParaphraseRequest


def _plan_requests(
    d: Dataset,
    plan: AugmentationPlan,
    seed: int,
    temperature: float,
    prompt_template: str,
) -> list[_PlannedRequest]:
    """Fully determine every paraphrase request before any provider call.

    Sources of each class are visited in seeded-shuffled cyclic order; the
    k-th paraphrase of a source gets id ``{source_id}#aug{k}`` and a request
    seed derived from (run seed, source id, k), so repeated paraphrases of
    one source differ and reruns are reproducible.
    """
    by_class: dict[str, list[LabeledExample]] = {c: [] for c in d.label_classes}
    for ex in d.examples:
        by_class[ex.label].append(ex)

    planned: list[_PlannedRequest] = []
    for label in d.label_classes:
        wanted = plan.additions.get(label, 0)
        if wanted == 0:
            continue
        sources = by_class.get(label, [])
        if not sources:
            raise ValidationError(
                f"plan requests {wanted} additions for class {label!r}, which has no examples"
            )
        rng = SplitMix64(derive_seed(seed, "augment-order", label))
        order = rng.shuffled(sources)
        per_source_count: dict[str, int] = {}
        for visit in range(wanted):
            source = order[visit % len(order)]
            k = per_source_count.get(source.id, 0)
            per_source_count[source.id] = k + 1
            request = ParaphraseRequest(
                text=source.text,
                seed=derive_seed(seed, source.id, k),
                temperature=temperature,
                prompt_template=prompt_template,
            )
            planned.append(_PlannedRequest(label, source, f"{source.id}#aug{k}", request))
    return planned


def augment_dataset(
    d: Dataset,
    plan: AugmentationPlan,
    provider: ParaphraseProvider,
    seed: int,
    temperature: float = DEFAULT_TEMPERATURE,
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE,
    parallelism: int = 1,
) -> Dataset:
    """Expand a dataset with paraphrases until each class gains plan.additions[c].

    Originals are retained unchanged; new examples are appended in plan
    order (classes in label-class order, generation order within a class),
    so output distribution = input distribution + plan.additions exactly.
    Requests may run concurrently (``parallelism`` > 1); assembly order is
    the deterministic plan order regardless of completion order.
    """
    for label in plan.additions:
        if label not in d.label_classes:
            raise ValidationError(f"plan names unknown class {label!r}")
    planned = _plan_requests(d, plan, seed, temperature, prompt_template)

    def run_one(item: _PlannedRequest) -> str:
        try:
            return provider.paraphrase(item.request)
        except ProviderError as exc:
            raise AugmentationError(
                f"paraphrase failed for class {item.label!r}, source {item.source.id!r}: {exc}",
                label=item.label,
                source_id=item.source.id,
            ) from exc

    if parallelism > 1 and planned:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            texts = list(pool.map(run_one, planned))
    else:
        texts = [run_one(item) for item in planned]

    new_examples = [
        LabeledExample(id=item.new_id, text=text, label=item.label)
        for item, text in zip(planned, texts)
    ]
    return d.replace_examples(list(d.examples) + new_examples)
