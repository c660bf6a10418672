"""Pydantic models for every configuration section."""

from typing import List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator


class GenConfig(BaseModel):
    """Synthetic scene generation."""

    image_size: int = Field(64, description="Square image side W in pixels")
    grid_size: int = Field(14, description="Feature grid side L the scenes are built for")
    min_entities: int = 2
    max_entities: int = 6
    ambiguous_fraction: float = 0.6
    shapes: List[str] = Field(default_factory=lambda: ["circle", "square", "triangle"])
    colors: List[str] = Field(default_factory=lambda: ["red", "green", "blue", "yellow"])
    predicates: List[str] = Field(default_factory=lambda: ["left", "right", "above", "below"])
    margin: float = Field(4.0, description="Minimum centre separation for spatial predicates")
    overlap_tolerance: float = 0.3
    min_side: int = 8
    max_side: int = 16
    border_cells: int = 2
    max_attempts: int = 1000
    train_size: int = 2000
    val_size: int = 300
    test_size: int = 500

    @field_validator("ambiguous_fraction", "overlap_tolerance")
    @classmethod
    def _unit_interval(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"must lie in [0, 1], got {value}")
        return value

    @field_validator("predicates")
    @classmethod
    def _known_predicates(cls, value: List[str]) -> List[str]:
        unknown = set(value) - {"left", "right", "above", "below"}
        if unknown:
            raise ValueError(f"unsupported spatial predicates: {sorted(unknown)}")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> "GenConfig":
        if self.image_size < self.grid_size:
            raise ValueError("image_size must be at least grid_size")
        if not 1 <= self.min_entities <= self.max_entities:
            raise ValueError("entity count range must satisfy 1 <= min <= max")
        if self.max_entities > len(self.categories) + 1:
            raise ValueError("max_entities exceeds what distinct categories allow")
        if self.ambiguous_fraction > 0 and self.max_entities < 2:
            raise ValueError("ambiguous scenes need at least two entities")
        if not 3 <= self.min_side <= self.max_side:
            raise ValueError("entity sides must satisfy 3 <= min_side <= max_side")
        if self.max_side > self.image_size - 2 * self.border_px:
            raise ValueError("entities do not fit inside the free border")
        return self

    @property
    def categories(self) -> List[str]:
        return [f"{color} {shape}" for color in self.colors for shape in self.shapes]

    @property
    def border_px(self) -> int:
        return -(-self.border_cells * self.image_size // self.grid_size)


class EncoderConfig(BaseModel):
    """Feature-map producer."""

    mode: Literal["oracle", "trainable"] = "oracle"
    grid_size: int = 14
    channels: Optional[int] = Field(
        None, description="Feature channels C; oracle mode derives |categories|+1"
    )
    conv_widths: List[int] = Field(default_factory=lambda: [8, 16])

    @field_validator("conv_widths")
    @classmethod
    def _two_widths(cls, value: List[int]) -> List[int]:
        if len(value) != 2 or min(value) < 1:
            raise ValueError("conv_widths lists the two hidden conv widths")
        return value

    def resolved_channels(self, n_categories: int) -> int:
        if self.mode == "oracle":
            return n_categories + 1
        return self.channels or 32


class ModelConfig(BaseModel):
    """Shift-stack geometry and initialisation."""

    kernel_size: int = 5
    shift_layers: int = 3
    shift_channels: int = 10
    kernel_init: Literal["identity", "uniform"] = "identity"
    init_noise: float = 0.1
    embedding_scale: float = 0.1


class TrainConfig(BaseModel):
    """Optimisation schedule."""

    iterations: int = Field(2, ge=0, description="Rollout iterations t")
    learning_rate: float = Field(1e-4, ge=0.0)
    decay_factor: float = Field(0.7, gt=0.0, lt=1.0)
    plateau_patience: int = Field(3, ge=1)
    epochs: int = Field(10, ge=0)
    batch_size: int = Field(32, ge=1)
    mask_rate: float = Field(0.0, ge=0.0, le=1.0)
    queries_per_scene: int = Field(4, ge=1)
    seed: int = 17
    rho: float = Field(0.9, gt=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)
    supervise_all_iterations: bool = False
    holdout_categories: List[str] = Field(
        default_factory=list,
        description="Categories whose scenes are removed from training and validation",
    )


class EvalConfig(BaseModel):
    """Thresholding and scoring."""

    tau: float = Field(0.5, gt=0.0, lt=1.0)
    tau_grid: List[float] = Field(
        default_factory=lambda: [round(0.1 * i, 1) for i in range(1, 10)]
    )
    kl_eps: float = 1e-12
    batch_size: int = Field(128, ge=1)

    @field_validator("tau_grid")
    @classmethod
    def _open_interval(cls, value: List[float]) -> List[float]:
        if not value or any(not 0.0 < t < 1.0 for t in value):
            raise ValueError("tau_grid values must lie in (0, 1)")
        return sorted(value)
