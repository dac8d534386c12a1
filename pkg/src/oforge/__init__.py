"""oforge: occlusion-aware copy-paste dataset tooling for sports frames."""

from . import errors
from .augment import (
    AugmentationConfig,
    AugmentedSample,
    CopyPasteAugmenter,
    DEFAULT_OUTPUT_SIZE,
    DEFAULT_RESIZE_SCALES,
    JitterParams,
    PasteRecord,
    SampleProvenance,
    apply_jitter,
    augment_dataset,
    base_transform_chain,
    copy_paste,
    draw_jitter,
    jitter_entity,
    place_occluder,
    provenance_records,
    resolve_region,
)
from .bank import EntityBank, EntityRecord, extract_entities, load_bank, sample_entities, save_bank
from .coco import (
    Category,
    DatasetBundle,
    ImageRecord,
    InstanceAnnotation,
    annotation_mask,
    load_dataset,
    load_image,
    parse_segmentation,
    save_dataset,
    save_image,
)
from .config import (
    MetricConfig,
    ToolConfig,
    augmentation_config_from_mapping,
    detector_config_from_mapping,
    load_config,
    metric_config_from_mapping,
)
from .errors import OForgeError
from .court import (
    ColorBand,
    CourtDetector,
    CourtSide,
    DetectionFailure,
    DetectorConfig,
    PlacementBounds,
    PlayableRegion,
    detect_playable_region,
    dominant_court_color,
    fallback_bounds,
    infer_court_side,
    sample_anchor,
)
from .masks import (
    ComponentSet,
    RleMask,
    connected_components,
    mask_bbox,
    mask_iou,
    paste_mask,
    rasterize_polygons,
    rle_decode,
    rle_encode,
    subtract,
)
from .metric import OMReport, SplitInstance, evaluate_om, find_split_instances, predictions_from_json
from .swa import NamedTensorCheckpoint, average_checkpoints, read_checkpoint, write_checkpoint

__version__ = "0.1.0"
