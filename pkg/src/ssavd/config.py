"""Architecture configuration and derived stage geometry."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict


def _conv_extent(n, k, stride, padding):
    return (n + 2 * padding - k) // stride + 1


@dataclass
class ModelConfig:
    """Every architectural hyperparameter plus derived per-stage extents.

    The frame extents shrink through a 4-stage pyramid: a strided stem
    followed by a stride-2 downsampler before stages 2-4.  ``t`` is the
    visual window edge used for tokenization and ``c_m`` the attention
    channel width, giving token length ``t*t*c_m``.
    """

    frames: int = 10
    visual_channels: int = 3
    height: int = 224
    width: int = 224
    audio_length: int = 48000
    stage_depths: tuple = (2, 2, 6, 2)
    stage_channels: tuple = (8, 16, 32, 64)
    c_m: int = 1
    t: int = 7
    visual_stem_stride: int = 4
    audio_stem_stride: int = 12

    stage_hw: list = field(init=False)
    stage_len: list = field(init=False)

    def __post_init__(self):
        self.stage_depths = tuple(self.stage_depths)
        self.stage_channels = tuple(self.stage_channels)
        if len(self.stage_depths) != 4 or len(self.stage_channels) != 4:
            raise ValueError("exactly four fusion stages are supported")
        if not all(a < b for a, b in zip(self.stage_channels, self.stage_channels[1:])):
            raise ValueError("stage channels must be strictly increasing")
        if self.c_m > self.stage_channels[0]:
            raise ValueError("attention channel width must not exceed stage-1 channels")

        h = _conv_extent(self.height, 7, self.visual_stem_stride, 3)
        w = _conv_extent(self.width, 7, self.visual_stem_stride, 3)
        l = _conv_extent(self.audio_length, 25, self.audio_stem_stride, 12)
        self.stage_hw = [(h, w)]
        self.stage_len = [l]
        for _ in range(3):
            h = _conv_extent(h, 3, 2, 1)
            w = _conv_extent(w, 3, 2, 1)
            l = _conv_extent(l, 5, 2, 2)
            self.stage_hw.append((h, w))
            self.stage_len.append(l)

        for s, ((hh, ww), ll) in enumerate(zip(self.stage_hw, self.stage_len)):
            if hh % self.t or ww % self.t:
                raise ValueError(
                    f"stage {s + 1} extent {hh}x{ww} not divisible by window edge t={self.t}"
                )
            if ll % self.frames:
                raise ValueError(
                    f"stage {s + 1} audio extent {ll} not divisible by frame count {self.frames}"
                )

    # -- derived geometry ---------------------------------------------

    @property
    def token_dim(self):
        return self.t * self.t * self.c_m

    def tokens_per_frame(self, stage):
        h, w = self.stage_hw[stage]
        return (h * w) // (self.t * self.t)

    def token_rows(self, stage):
        """Rows of the concatenated token matrix: T*N visual + T audio."""
        return self.frames * self.tokens_per_frame(stage) + self.frames

    def visual_input_shape(self):
        return (self.frames, self.visual_channels, self.height, self.width)

    def audio_input_shape(self):
        return (1, self.audio_length)

    def to_dict(self):
        d = asdict(self)
        d.pop("stage_hw")
        d.pop("stage_len")
        d["stage_depths"] = list(self.stage_depths)
        d["stage_channels"] = list(self.stage_channels)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("stage_hw", None)
        d.pop("stage_len", None)
        return cls(**d)

    @classmethod
    def preset(cls, name):
        if name == "paper":
            return cls()
        if name == "desk":
            return cls(height=64, width=64, audio_length=4800, t=2)
        if name == "tiny":
            # smallest config that exercises every code path; used for
            # end-to-end gradient checks
            return cls(
                frames=2,
                height=16,
                width=16,
                audio_length=1920,
                stage_depths=(1, 1, 1, 1),
                stage_channels=(2, 3, 4, 5),
                t=1,
            )
        raise ValueError(f"unknown preset {name!r}")


PRESETS = ("paper", "desk", "tiny")
