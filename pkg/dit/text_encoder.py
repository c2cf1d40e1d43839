"""
Toy text encoder: whitespace tokenization over the event vocabulary
"""

import re
from dataclasses import dataclass
from typing import List

import numpy as np

from models.events import vocabulary
from utils.errors import TextEncodingError

OOV_TOKEN = '<oov>'
NULL_TOKEN = '<null>'


@dataclass
class TextCondition:
    caption: str
    tokens: np.ndarray
    embeddings: np.ndarray = None

    def __len__(self):
        return int(self.tokens.size)


class TextEncoder:
    """Maps captions to token ids; unknown words map to the OOV token"""

    def __init__(self, vocab: List[str] = None):
        words = list(vocab) if vocab is not None else vocabulary()
        for special in (OOV_TOKEN, NULL_TOKEN):
            if special not in words:
                words.append(special)
        self.vocab = words
        self.index = {word: i for i, word in enumerate(words)}
        self.oov_id = self.index[OOV_TOKEN]
        self.null_id = self.index[NULL_TOKEN]

    def __len__(self):
        return len(self.vocab)

    @staticmethod
    def tokenize(caption: str) -> List[str]:
        return re.sub(r"[^\w\s<>']", ' ', caption.lower()).split()

    def encode(self, caption: str) -> TextCondition:
        if caption is None or not caption.strip():
            raise TextEncodingError("Cannot embed an empty caption")
        words = self.tokenize(caption)
        if not words:
            words = [OOV_TOKEN]
        tokens = np.array([self.index.get(w, self.oov_id) for w in words], dtype=np.int64)
        return TextCondition(caption=caption, tokens=tokens)

    def null_condition(self) -> TextCondition:
        """Condition used for the unconditional branch of classifier-free guidance"""
        return TextCondition(caption=NULL_TOKEN, tokens=np.array([self.null_id], dtype=np.int64))
