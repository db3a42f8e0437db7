"""Encoder-decoder translator with a 1x1 bottleneck and one low-res skip.

The encoder halves resolution once per block until the feature map is 1x1,
so edits act on a single d-channel code with a global view of the image.
Fine detail rides around the bottleneck on exactly one skip connection,
captured at a low resolution so the code still has to carry the attributes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .directions import DirectionMatrix, shift_scale, translate

# encoder channel widths, stem first; decoder mirrors them
DEFAULT_SCHEDULES: dict[int, tuple[int, ...]] = {
    256: (64, 64, 128, 256, 512, 512, 512, 1024, 2048),
    # 128-to-1 needs 7 halvings: one 512 stage fewer than the 256 schedule
    128: (64, 64, 128, 256, 512, 512, 1024, 2048),
    64: (32, 32, 64, 64, 128, 128, 256),
    32: (16, 16, 32, 32, 64, 64),
}

LEAKY_SLOPE = 0.2


def _block_count(resolution: int) -> int:
    count = resolution.bit_length() - 1
    if resolution <= 1 or 2**count != resolution:
        raise ValueError(f"input resolution must be a power of two >= 2, got {resolution}")
    return count


@dataclass(frozen=True)
class GeneratorConfig:
    input_resolution: int
    channel_schedule: tuple[int, ...]
    skip_resolution: int = 32
    # per-downsampling-block / per-upsampling-block normalization switches;
    # defaults omit the last down block and the first up block
    encoder_norm: tuple[bool, ...] = field(default=())
    decoder_norm: tuple[bool, ...] = field(default=())

    def __post_init__(self) -> None:
        blocks = _block_count(self.input_resolution)
        if len(self.channel_schedule) != blocks + 1:
            raise ValueError(
                f"channel schedule must have {blocks + 1} entries (stem + {blocks} "
                f"blocks) for resolution {self.input_resolution}, "
                f"got {len(self.channel_schedule)}"
            )
        valid_skips = {self.input_resolution >> k for k in range(1, blocks)}
        if self.skip_resolution not in valid_skips:
            raise ValueError(
                f"skip resolution {self.skip_resolution} is not an intermediate "
                f"encoder resolution {sorted(valid_skips)}"
            )
        if not self.encoder_norm:
            object.__setattr__(
                self, "encoder_norm", tuple(i < blocks - 1 for i in range(blocks))
            )
        if not self.decoder_norm:
            object.__setattr__(self, "decoder_norm", tuple(i > 0 for i in range(blocks)))
        if len(self.encoder_norm) != blocks or len(self.decoder_norm) != blocks:
            raise ValueError("norm placement flags must have one entry per block")

    @property
    def n_blocks(self) -> int:
        return len(self.channel_schedule) - 1

    @property
    def latent_dim(self) -> int:
        return self.channel_schedule[-1]

    @property
    def skip_channels(self) -> int:
        # schedule entry of the block whose post-pool output sits at the skip
        # resolution: input_resolution / 2^k == skip_resolution
        k = _block_count(self.input_resolution) - _block_count(self.skip_resolution)
        return self.channel_schedule[k]

    @classmethod
    def for_resolution(
        cls,
        resolution: int,
        channel_schedule: tuple[int, ...] | None = None,
        skip_resolution: int | None = None,
    ) -> "GeneratorConfig":
        if channel_schedule is None:
            if resolution not in DEFAULT_SCHEDULES:
                raise ValueError(
                    f"no default channel schedule for resolution {resolution}; "
                    f"known: {sorted(DEFAULT_SCHEDULES)}"
                )
            channel_schedule = DEFAULT_SCHEDULES[resolution]
        if skip_resolution is None:
            skip_resolution = 32 if resolution > 32 else resolution // 4
        return cls(
            input_resolution=resolution,
            channel_schedule=tuple(channel_schedule),
            skip_resolution=skip_resolution,
        )

    def to_dict(self) -> dict:
        return {
            "input_resolution": self.input_resolution,
            "channel_schedule": list(self.channel_schedule),
            "skip_resolution": self.skip_resolution,
            "encoder_norm": list(self.encoder_norm),
            "decoder_norm": list(self.decoder_norm),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GeneratorConfig":
        return cls(
            input_resolution=int(payload["input_resolution"]),
            channel_schedule=tuple(payload["channel_schedule"]),
            skip_resolution=int(payload["skip_resolution"]),
            encoder_norm=tuple(payload.get("encoder_norm", ())),
            decoder_norm=tuple(payload.get("decoder_norm", ())),
        )


@dataclass
class EncodedImage:
    """Bottleneck code (B, d) plus the skip feature map (B, c, s, s)."""

    bottleneck: torch.Tensor
    skip: torch.Tensor


class ResidualBlock(nn.Module):
    """Two 3x3 convs, each preceded by (optional) IN and LeakyReLU; identity
    shortcut, 1x1 conv on the shortcut when channel counts differ."""

    def __init__(self, c_in: int, c_out: int, use_norm: bool = True):
        super().__init__()
        self.norm1 = nn.InstanceNorm2d(c_in, affine=True) if use_norm else nn.Identity()
        self.norm2 = nn.InstanceNorm2d(c_out, affine=True) if use_norm else nn.Identity()
        self.act = nn.LeakyReLU(LEAKY_SLOPE)
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        if c_in != c_out:
            self.shortcut: nn.Module = nn.Conv2d(c_in, c_out, 1, bias=False)
        else:
            self.shortcut = nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(self.act(self.norm1(x)))
        h = self.conv2(self.act(self.norm2(h)))
        return self.shortcut(x) + h


class Encoder(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        c = config.channel_schedule
        self.stem = nn.Conv2d(3, c[0], 3, padding=1)
        self.blocks = nn.ModuleList(
            ResidualBlock(c[i], c[i + 1], use_norm=config.encoder_norm[i])
            for i in range(config.n_blocks)
        )
        self.pool = nn.AvgPool2d(2)

    def forward(self, x: torch.Tensor) -> EncodedImage:
        squeeze = x.dim() == 3
        if squeeze:
            x = x.unsqueeze(0)
        r = self.config.input_resolution
        if x.dim() != 4 or x.shape[1] != 3 or x.shape[2] != r or x.shape[3] != r:
            raise ValueError(
                f"expected input of shape (B, 3, {r}, {r}), got {tuple(x.shape)}"
            )
        h = self.stem(x)
        resolution = r
        skip = None
        for block in self.blocks:
            h = self.pool(block(h))
            resolution //= 2
            if resolution == self.config.skip_resolution:
                skip = h
        assert skip is not None
        bottleneck = h.flatten(1)
        if squeeze:
            bottleneck = bottleneck.squeeze(0)
            skip = skip.squeeze(0)
        return EncodedImage(bottleneck=bottleneck, skip=skip)


class Decoder(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        c = config.channel_schedule
        n = config.n_blocks
        self.blocks = nn.ModuleList(
            ResidualBlock(c[n - i], c[n - i - 1], use_norm=config.decoder_norm[i])
            for i in range(n)
        )
        self.upsample = nn.Upsample(scale_factor=2, mode="nearest")
        self.head = nn.Conv2d(c[0], 3, 3, padding=1)

    def forward(self, enc: EncodedImage) -> torch.Tensor:
        bottleneck, skip = enc.bottleneck, enc.skip
        squeeze = bottleneck.dim() == 1
        if squeeze:
            bottleneck = bottleneck.unsqueeze(0)
            skip = skip.unsqueeze(0)
        cfg = self.config
        if bottleneck.shape[1] != cfg.latent_dim:
            raise ValueError(
                f"bottleneck has {bottleneck.shape[1]} channels, config wants {cfg.latent_dim}"
            )
        expected_skip = (cfg.skip_channels, cfg.skip_resolution, cfg.skip_resolution)
        if tuple(skip.shape[1:]) != expected_skip:
            raise ValueError(f"skip has shape {tuple(skip.shape[1:])}, want {expected_skip}")
        h = bottleneck.unsqueeze(-1).unsqueeze(-1)
        resolution = 1
        for block in self.blocks:
            h = block(self.upsample(h))
            resolution *= 2
            if resolution == cfg.skip_resolution:
                h = h + skip
        out = torch.tanh(self.head(h))
        return out.squeeze(0) if squeeze else out


class Generator(nn.Module):
    """Full translator: encode, shift along a direction, decode."""

    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        self.encoder = Encoder(config)
        self.decoder = Decoder(config)

    def encode(self, x: torch.Tensor) -> EncodedImage:
        return self.encoder(x)

    def decode(self, enc: EncodedImage) -> torch.Tensor:
        return self.decoder(enc)

    def reconstruct(self, x: torch.Tensor) -> torch.Tensor:
        return self.decode(self.encode(x))

    def translate_image(
        self, x: torch.Tensor, alpha, tag: int, directions: DirectionMatrix
    ) -> torch.Tensor:
        """Shift the bottleneck by alpha along the tag direction; the skip
        features pass through unmodified."""
        enc = self.encode(x)
        shifted = translate(enc.bottleneck, alpha, tag, directions)
        return self.decode(EncodedImage(bottleneck=shifted, skip=enc.skip))

    def edit_to_scale(
        self, x: torch.Tensor, alpha_target, tag: int, directions: DirectionMatrix
    ) -> torch.Tensor:
        """Move the image's scale for the tag to alpha_target (net shift =
        target minus the image's current projection)."""
        from .directions import project  # local import to avoid cycle at module load

        enc = self.encode(x)
        alpha_source = project(enc.bottleneck, tag, directions)
        alpha = shift_scale(alpha_target, alpha_source)
        shifted = translate(enc.bottleneck, alpha, tag, directions)
        return self.decode(EncodedImage(bottleneck=shifted, skip=enc.skip))
