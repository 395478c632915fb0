import json


def make_dataset_text(images, annotations, categories=None):
    """Assemble an annotation file from plain dicts."""
    if categories is None:
        categories = [{"id": 1, "name": "thing"}]
    return json.dumps(
        {"images": images, "annotations": annotations, "categories": categories}
    )
