"""Services for mirgan-desk: corpus, training, evaluation and analysis."""

from src.services.corpus_store import CorpusStore, load_corpus, save_corpus
from src.services.synthdata import add_babble, add_noise, generate_corpus

__all__ = [
    "CorpusStore",
    "add_babble",
    "add_noise",
    "generate_corpus",
    "load_corpus",
    "save_corpus",
]
