# FreeAudio test suite
