#include <stddef.h>

/* Returns the byte length of the UTF-8 sequence starting with `lead`,
   or -1 when the byte cannot start a sequence. */
int utf8_sequence_len(unsigned char lead)
{
	if (lead < 0x80)
		return 1;
	if ((lead & 0xE0) == 0xC0)
		return 2;
	if ((lead & 0xF0) == 0xE0)
		return 3;
	if ((lead & 0xF8) == 0xF0)
		return 4;
	return -1;
}

int utf8_validate(const unsigned char *s, size_t n)
{
	size_t i = 0;
	while (i < n) {
		int len = utf8_sequence_len(s[i]);
		int k;
		if (len < 0)
			return 0;
		if (i + (size_t)len > n)
			return 0;
		for (k = 1; k < len; k++) {
			if ((s[i + k] & 0xC0) != 0x80)
				return 0;
		}
		i += (size_t)len;
	}
	return 1;
}
