"""Search result diversification toolkit.

Builds candidate query intents from a query log (count-based prefix-tree
model or an external generator), scores documents per intent with lexical
rankers, aggregates with xQuAD / PM2, and evaluates rankings with
intent-aware diversity metrics.
"""

__version__ = "0.1.0"
