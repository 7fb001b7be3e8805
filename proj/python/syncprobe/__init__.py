"""Flush-latency timing toolkit: simulator, benchmarks, covert channel and trace analysis."""

try:
    from . import _syncprobe as _ext
except ImportError:  # in-tree build: the extension sits next to the package
    import _syncprobe as _ext

Error = _ext.Error
IoOp = _ext.IoOp
DelayProfile = _ext.DelayProfile
DelayTrace = _ext.DelayTrace
Spectrogram = _ext.Spectrogram
ChannelConfig = _ext.ChannelConfig

fit_linear = _ext.fit_linear
levenshtein = _ext.levenshtein
stft = _ext.stft
snr = _ext.snr
detect_spikes = _ext.detect_spikes
calibrate_threshold = _ext.calibrate_threshold
bytes_to_bits = _ext.bytes_to_bits
bits_to_bytes = _ext.bits_to_bytes
profile_names = _ext.profile_names
profile = _ext.profile
footprint = _ext.footprint
loopback = _ext.loopback
read_trace = _ext.read_trace
write_trace = _ext.write_trace
read_spectrogram = _ext.read_spectrogram
write_spectrogram = _ext.write_spectrogram

__all__ = [name for name in dir() if not name.startswith("_")]
