"""Spherical t-design with 60 nodes (strength 10).

Hardin & Sloane, "McLaren's improved snub cube and other new spherical
designs in three dimensions", Discrete Comput. Geom. 15 (1996), file
``des.3.60.10.txt`` from http://neilsloane.com/sphdesigns/ .
Equal-weight quadrature with these nodes is exact for polynomials of degree
<= 10, so spherical harmonics up to order 5 are orthonormal on it.
"""

TDESIGN_60 = (
    (-0.753828667197017, 0.54595190806126, -0.365621190026287),
    (0.545951908061258, -0.36562119002629, -0.753828667197017),
    (0.753828667197016, -0.545951908061261, -0.365621190026288),
    (-0.365621190026289, -0.753828667197017, 0.545951908061259),
    (-0.545951908061258, -0.365621190026288, 0.753828667197018),
    (-0.365621190026289, 0.753828667197017, -0.545951908061259),
    (-0.545951908061258, 0.365621190026289, -0.753828667197017),
    (0.365621190026287, 0.753828667197017, 0.54595190806126),
    (0.545951908061259, 0.365621190026289, 0.753828667197017),
    (0.365621190026287, -0.753828667197018, -0.545951908061259),
    (-0.753828667197017, -0.545951908061261, 0.365621190026288),
    (0.753828667197016, 0.545951908061261, 0.365621190026287),
    (0.70018101936373, -0.713151065847793, 0.034089549761256),
    (-0.713151065847794, 0.034089549761254, 0.700181019363729),
    (-0.70018101936373, 0.713151065847793, 0.034089549761256),
    (0.034089549761255, 0.70018101936373, -0.713151065847793),
    (0.713151065847793, 0.034089549761254, -0.70018101936373),
    (0.034089549761257, -0.700181019363729, 0.713151065847794),
    (0.713151065847794, -0.034089549761255, 0.700181019363728),
    (-0.034089549761256, -0.700181019363729, -0.713151065847794),
    (-0.713151065847794, -0.034089549761254, -0.700181019363729),
    (-0.034089549761257, 0.700181019363729, 0.713151065847794),
    (0.70018101936373, 0.713151065847793, -0.034089549761257),
    (-0.700181019363729, -0.713151065847794, -0.034089549761257),
    (0.276230218261792, 0.077050720725736, -0.957997939953259),
    (0.077050720725735, -0.957997939953258, 0.276230218261793),
    (-0.276230218261792, -0.077050720725734, -0.957997939953259),
    (-0.957997939953259, 0.276230218261791, 0.077050720725738),
    (-0.077050720725735, -0.957997939953259, -0.276230218261792),
    (-0.957997939953258, -0.276230218261793, -0.077050720725736),
    (-0.077050720725736, 0.957997939953258, 0.276230218261794),
    (0.957997939953259, -0.27623021826179, 0.077050720725737),
    (0.077050720725734, 0.957997939953259, -0.276230218261792),
    (0.957997939953258, 0.276230218261793, -0.077050720725738),
    (0.276230218261793, -0.077050720725736, 0.957997939953258),
    (-0.276230218261791, 0.077050720725735, 0.957997939953259),
    (0.451819102555243, -0.783355937521819, 0.42686411621907),
    (-0.783355937521818, 0.426864116219071, 0.451819102555243),
    (-0.451819102555243, 0.783355937521819, 0.42686411621907),
    (0.426864116219071, 0.451819102555242, -0.783355937521819),
    (0.783355937521818, 0.42686411621907, -0.451819102555244),
    (0.426864116219072, -0.451819102555242, 0.783355937521818),
    (0.783355937521819, -0.42686411621907, 0.451819102555242),
    (-0.426864116219072, -0.451819102555241, -0.783355937521819),
    (-0.783355937521818, -0.42686411621907, -0.451819102555243),
    (-0.426864116219072, 0.451819102555241, 0.783355937521819),
    (0.451819102555243, 0.783355937521818, -0.426864116219071),
    (-0.451819102555242, -0.783355937521819, -0.426864116219071),
    (-0.33858435995926, -0.933210037239527, 0.120331448866784),
    (-0.933210037239526, 0.120331448866787, -0.33858435995926),
    (0.338584359959261, 0.933210037239526, 0.120331448866786),
    (0.120331448866785, -0.338584359959261, -0.933210037239526),
    (0.933210037239526, 0.120331448866789, 0.33858435995926),
    (0.120331448866785, 0.338584359959261, 0.933210037239526),
    (0.933210037239526, -0.120331448866787, -0.338584359959262),
    (-0.120331448866784, 0.338584359959262, -0.933210037239526),
    (-0.933210037239526, -0.120331448866787, 0.338584359959261),
    (-0.120331448866784, -0.338584359959262, 0.933210037239526),
    (-0.338584359959262, 0.933210037239526, -0.120331448866784),
    (0.338584359959261, -0.933210037239527, -0.120331448866783),
)
