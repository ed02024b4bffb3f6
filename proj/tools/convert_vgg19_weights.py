#!/usr/bin/env python3
"""Convert a torch VGG19 checkpoint into the MESA backbone weights format.

Usage:
    python3 tools/convert_vgg19_weights.py --checkpoint vgg19.pth --out mesa-backbone.weights
    python3 tools/convert_vgg19_weights.py --torchvision --out mesa-backbone.weights

The output format is documented in the README (MESAWGT1). Only the twelve
convolutions feeding the tap layers are exported (blocks 1-4); the classifier
and block-5 convolutions are not used by the restoration loss.
"""

import argparse
import struct
import sys

CONVS = [
    ("conv1_1", "features.0"),
    ("conv1_2", "features.2"),
    ("conv2_1", "features.5"),
    ("conv2_2", "features.7"),
    ("conv3_1", "features.10"),
    ("conv3_2", "features.12"),
    ("conv3_3", "features.14"),
    ("conv3_4", "features.16"),
    ("conv4_1", "features.19"),
    ("conv4_2", "features.21"),
    ("conv4_3", "features.23"),
    ("conv4_4", "features.25"),
]


def write_tensor(f, name: str, array) -> None:
    data = array.detach().cpu().contiguous().to(dtype=__import__("torch").float32).numpy()
    f.write(struct.pack("<H", len(name)))
    f.write(name.encode())
    f.write(struct.pack("<BB", 1, data.ndim))  # dtype 1 = f32
    for d in data.shape:
        f.write(struct.pack("<I", d))
    f.write(data.tobytes())


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--checkpoint", help="Path to a state_dict .pth file")
    ap.add_argument("--torchvision", action="store_true",
                    help="Load torchvision's pretrained VGG19 instead (needs network access)")
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    import torch

    if args.torchvision:
        from torchvision.models import vgg19, VGG19_Weights
        state = vgg19(weights=VGG19_Weights.IMAGENET1K_V1).state_dict()
    elif args.checkpoint:
        state = torch.load(args.checkpoint, map_location="cpu")
        if hasattr(state, "state_dict"):
            state = state.state_dict()
    else:
        ap.error("one of --checkpoint or --torchvision is required")

    with open(args.out, "wb") as f:
        f.write(b"MESAWGT1")
        f.write(struct.pack("<I", len(CONVS) * 2))
        for mesa_name, torch_name in CONVS:
            for field in ("weight", "bias"):
                key = f"{torch_name}.{field}"
                if key not in state:
                    print(f"missing tensor {key} in checkpoint", file=sys.stderr)
                    return 1
                write_tensor(f, f"{mesa_name}.{field}", state[key])
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
