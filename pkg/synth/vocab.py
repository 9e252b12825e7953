"""Character-level vocabulary shared by the Q-Former instruction table and the LM."""

from typing import Dict, List, Sequence

from config.app_config import BOS_ID, EOS_ID, GLYPH_CHARSET, PAD_ID, SPACE
from synth.errors import VocabError

SPECIALS = {"<pad>": PAD_ID, "<bos>": BOS_ID, "<eos>": EOS_ID}


class Vocab:
    """Bidirectional char <-> id map with fixed special ids PAD=0, BOS=1, EOS=2."""

    def __init__(self, charset: str = GLYPH_CHARSET + SPACE):
        if len(set(charset)) != len(charset):
            raise VocabError("charset contains duplicate characters")
        offset = len(SPECIALS)
        self.id_of: Dict[str, int] = {c: offset + i for i, c in enumerate(charset)}
        self.char_of: Dict[int, str] = {i: c for c, i in self.id_of.items()}
        self.charset = charset

    def __len__(self) -> int:
        return len(SPECIALS) + len(self.charset)

    @property
    def size(self) -> int:
        return len(self)

    def encode(self, text: str) -> List[int]:
        """
        Map each character to its id; no BOS/EOS is added.

        Raises:
            VocabError: If a character is outside the charset
        """
        ids = []
        for c in text:
            if c not in self.id_of:
                raise VocabError(f"Unknown character {c!r} in {text!r}")
            ids.append(self.id_of[c])
        return ids

    def decode(self, ids: Sequence[int], stop_at_eos: bool = True) -> str:
        """Map ids back to text; specials are dropped and EOS ends decoding."""
        chars = []
        for i in ids:
            if i == EOS_ID and stop_at_eos:
                break
            if i in self.char_of:
                chars.append(self.char_of[i])
        return "".join(chars)

    def encode_answer(self, text: str) -> List[int]:
        """Encode text and terminate with EOS; "" becomes [EOS]."""
        return self.encode(text) + [EOS_ID]


def encode(v: Vocab, s: str) -> List[int]:
    return v.encode(s)


DEFAULT_VOCAB = Vocab()
