"""scikit-learn style estimator wrapping the extraction model.

``ClaimGraphExtractor`` follows the estimator protocol: hyperparameters are
constructor arguments stored verbatim (so ``get_params`` / ``set_params`` /
``clone`` work), fitted state lives in trailing-underscore attributes, and
``fit`` / ``predict`` / ``score`` compose with the wider ecosystem.  X is a
corpus (or list of annotated sentences) for ``fit`` and a list of token
sequences for ``predict``.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import AnnotatedSentence, Corpus
from .metrics import MetricsReport, score_corpus
from .model.network import predict as run_predict
from .model.providers import TokenLookupProvider
from .training import TrainConfig, train


def _as_corpus(X) -> Corpus:
    if isinstance(X, Corpus):
        return X
    if isinstance(X, (list, tuple)) and all(isinstance(s, AnnotatedSentence) for s in X):
        return Corpus(tuple(X))
    raise TypeError("expected a Corpus or a list of AnnotatedSentence, got "
                    f"{type(X).__name__}")


class ClaimGraphExtractor(BaseEstimator):
    """Joint entity / attribute / relation extractor over token spans.

    Parameters mirror :class:`claimgraph.training.TrainConfig`; ``provider``
    defaults to a trainable token-lookup embedding table built from the
    training corpus vocabulary.
    """

    def __init__(self, *, embedding_dim=32, max_span_size=20, epochs=40,
                 batch_size=8, learning_rate=5e-5, warmup_fraction=0.1,
                 weight_decay=0.01, max_grad_norm=1.0, dropout=0.1,
                 neg_entity_count=100, neg_relation_count=100,
                 attr_threshold=0.55, rel_threshold=0.4,
                 span_repr_mode="attention", attribute_filtering="cascaded",
                 attrs_as_ents=False, seed=0, provider=None):
        self.embedding_dim = embedding_dim
        self.max_span_size = max_span_size
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.warmup_fraction = warmup_fraction
        self.weight_decay = weight_decay
        self.max_grad_norm = max_grad_norm
        self.dropout = dropout
        self.neg_entity_count = neg_entity_count
        self.neg_relation_count = neg_relation_count
        self.attr_threshold = attr_threshold
        self.rel_threshold = rel_threshold
        self.span_repr_mode = span_repr_mode
        self.attribute_filtering = attribute_filtering
        self.attrs_as_ents = attrs_as_ents
        self.seed = seed
        self.provider = provider

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, warmup_fraction=self.warmup_fraction,
            weight_decay=self.weight_decay, max_grad_norm=self.max_grad_norm,
            dropout=self.dropout, seed=self.seed, dim=self.embedding_dim,
            max_span_size=self.max_span_size, span_repr_mode=self.span_repr_mode,
            attribute_filtering=self.attribute_filtering,
            attrs_as_ents=self.attrs_as_ents,
            neg_entity_count=self.neg_entity_count,
            neg_relation_count=self.neg_relation_count,
            attr_threshold=self.attr_threshold, rel_threshold=self.rel_threshold)

    def fit(self, X, y=None):
        """Train on a corpus of annotated sentences; y is ignored (gold
        graphs travel with the sentences)."""
        corpus = _as_corpus(X)
        if len(corpus) == 0:
            raise ValueError("cannot fit on an empty corpus")
        provider = self.provider
        if provider is None:
            train_split = corpus.subset("train")
            provider = TokenLookupProvider.from_corpus(
                train_split if len(train_split) else corpus, self.embedding_dim)
        config = self._train_config()
        self.params_, self.report_ = train(corpus, provider, config)
        self.provider_ = provider
        self.inference_config_ = config.inference_config()
        return self

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(
                "This ClaimGraphExtractor instance is not fitted yet; "
                "call fit before predict/score.")

    def predict(self, X):
        """Predicted graphs for token sequences (or annotated sentences)."""
        self._check_fitted()
        return [p.graph for p in self.predict_with_scores(X)]

    def predict_with_scores(self, X):
        self._check_fitted()
        out = []
        for item in X:
            if isinstance(item, AnnotatedSentence):
                tokens, sid = item.graph.tokens, item.id
            else:
                tokens, sid = list(item), None
            out.append(run_predict(tokens, self.provider_, self.params_,
                                   self.inference_config_, sid=sid))
        return out

    def score(self, X, y=None) -> float:
        """Mean of the three task micro-F1s against the gold annotations."""
        return self.score_report(X).micro_f1_average()

    def score_report(self, X) -> MetricsReport:
        self._check_fitted()
        corpus = _as_corpus(X)
        predictions = {
            s.id: run_predict(s.graph.tokens, self.provider_, self.params_,
                              self.inference_config_, sid=s.id).graph
            for s in corpus}
        return score_corpus(corpus, predictions)
