"""roomkit: tooling for hierarchical indoor scene understanding.

Modules:

* scenegraph: parse/validate/serialize scene-graph JSON and decompose it
  into evaluation units
* metrics: four-perspective graph scoring, distance-band accuracy, error
  statistics
* geometry: depth back-projection, centroid distances, bounding boxes
* backends: model-backend wire protocol, retrying client, scripted mock
* perception: the iterative object perception loop
* scenevqa: training-record generation and dataset curation filters
* service: the annotation review service (store + HTTP API)
"""

__version__ = "0.1.0"
