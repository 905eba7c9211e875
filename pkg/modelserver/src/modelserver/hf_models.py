"""Transformer-backed endpoint implementations via ``transformers`` pipelines.

Loading happens eagerly at registry construction; any resolution error
propagates and aborts startup.
"""

from __future__ import annotations

import re

_WORD_RE = re.compile(r"\w+|[^\w\s]")


def load(endpoint: str, model_id: str, device: str = "cpu", beam_size: int = 1):
    from transformers import pipeline

    pipeline_device = -1 if device == "cpu" else 0
    try:
        if endpoint == "qg":
            pipe = pipeline("text2text-generation", model=model_id, device=pipeline_device)
            return _HfQG(pipe, beam_size)
        if endpoint == "qa":
            pipe = pipeline("question-answering", model=model_id, device=pipeline_device)
            return _HfQA(pipe)
        if endpoint == "nli":
            pipe = pipeline("text-classification", model=model_id, device=pipeline_device)
            return _HfNLI(pipe)
        if endpoint == "embed":
            pipe = pipeline("feature-extraction", model=model_id, device=pipeline_device)
            return _HfEmbed(pipe)
        if endpoint == "generate":
            pipe = pipeline("text2text-generation", model=model_id, device=pipeline_device)
            return _HfGenerate(pipe, beam_size)
        if endpoint == "spans":
            pipe = pipeline("token-classification", model=model_id, device=pipeline_device,
                            aggregation_strategy="simple")
            return _HfSpans(pipe)
    except Exception as exc:
        raise RuntimeError(f"failed to load {model_id!r} for /v1/{endpoint}: {exc}") from exc
    raise RuntimeError(f"no transformer wrapper for endpoint {endpoint!r}")


class _HfQG:
    def __init__(self, pipe, beam_size: int):
        self.pipe = pipe
        self.beam_size = beam_size

    def __call__(self, sentence: str, start: int, end: int) -> str:
        marked = f"{sentence[:start]}<hl>{sentence[start:end]}<hl>{sentence[end:]}"
        out = self.pipe(marked, num_beams=self.beam_size, do_sample=False)
        return out[0]["generated_text"]


class _HfQA:
    def __init__(self, pipe):
        self.pipe = pipe

    def __call__(self, question: str, context: str) -> tuple[str, bool, float]:
        if not context.strip():
            return "", True, 0.0
        out = self.pipe(question=question, context=context, handle_impossible_answer=True)
        answer = out.get("answer", "") or ""
        score = float(out.get("score", 0.0))
        return answer, answer == "", score


_NLI_CANON = {"entailment": "entailment", "neutral": "neutral", "contradiction": "contradiction"}


class _HfNLI:
    def __init__(self, pipe):
        self.pipe = pipe

    def __call__(self, premise: str, hypothesis: str) -> tuple[str, list[float]]:
        scores = self.pipe({"text": premise, "text_pair": hypothesis}, top_k=None)
        probs = {"entailment": 0.0, "neutral": 0.0, "contradiction": 0.0}
        for item in scores:
            label = item["label"].lower()
            for canon in probs:
                if canon in label:
                    probs[canon] = float(item["score"])
        ordered = [probs["entailment"], probs["neutral"], probs["contradiction"]]
        total = sum(ordered) or 1.0
        ordered = [p / total for p in ordered]
        labels = ("entailment", "neutral", "contradiction")
        return labels[max(range(3), key=lambda i: ordered[i])], ordered


class _HfEmbed:
    def __init__(self, pipe):
        self.pipe = pipe
        self.dim = None

    def __call__(self, texts: list[str], mode: str) -> list:
        out = []
        for text in texts:
            features = self.pipe(text)[0]  # (tokens, dim)
            if mode == "token":
                out.append([list(map(float, v)) for v in features])
            else:
                dim = len(features[0])
                mean = [sum(v[i] for v in features) / len(features) for i in range(dim)]
                out.append(mean)
        return out


class _HfSpans:
    def __init__(self, pipe):
        self.pipe = pipe

    def __call__(self, sentence: str) -> list[tuple[int, int]]:
        return [(int(e["start"]), int(e["end"])) for e in self.pipe(sentence)]


class _HfGenerate:
    def __init__(self, pipe, beam_size: int):
        self.pipe = pipe
        self.beam_size = beam_size

    def __call__(self, inputs: list[str], max_tokens: int) -> str:
        outputs = self.pipe(list(inputs), num_beams=self.beam_size, do_sample=False,
                            max_new_tokens=max_tokens)
        return "\n".join(o["generated_text"] for o in outputs)
