from protokws.synthcorpus.generator import (
    TTS_PREFIX,
    CorpusConfig,
    class_centroids,
    generate_augment_keywords,
    generate_corpus,
)

__all__ = [
    "TTS_PREFIX",
    "CorpusConfig",
    "class_centroids",
    "generate_augment_keywords",
    "generate_corpus",
]
