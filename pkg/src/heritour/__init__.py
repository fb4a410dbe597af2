"""heritour: an event-driven backend for gamified heritage-site visits.

Visitor journeys run as DAGs of points of interest, gamification rules are
authored in a small DSL, a deterministic recommender picks the next stop,
narratives pass expert validation before publication, AR trackables resolve
to POIs, and everything synchronizes through an append-only event bus with
live socket push.
"""

__version__ = "0.1.0"
