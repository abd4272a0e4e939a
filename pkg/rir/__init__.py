from .room import RoomSpec, sample_room, sample_room_set, absorption, min_rt60, NOMINAL_DIMS
from .image_method import Rir, image_method_rir, make_rir_set, save_rir, load_rir, rir_to_frame
from .rt60 import estimate_rt60, schroeder_curve
