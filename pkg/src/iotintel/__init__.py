"""IoT threat-intelligence assistant engine.

Subpackages and modules:

- ``corpus``: dataset descriptors, field selection, ingestion into documents
- ``chunking``: text splitters, chunk-quality metrics, strategy optimizer
- ``index``: exact-cosine vector store with metadata filtering
- ``selfquery``: LLM-written structured queries over a vector index
- ``orchestrator``: retriever selection and role-tailored answer generation
- ``llmgateway``: chat providers, scripted stand-ins, transcript replay
- ``evalharness``: pairwise answer comparison with an LLM judge
- ``service``: HTTP API, CLI, and the engine wiring them together
"""

__version__ = "0.1.0"
